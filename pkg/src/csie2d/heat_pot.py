"""Single layer heat potential: product integration in time, Nystrom in space.

Notation.  For a target at time t and a source density sampled at earlier
times, s = t - t' is the elapsed time and a = |x - y|^2 / 4.  The normal
(tangential) derivative of the heat single layer has kernel

    -P / (8 pi) * s^-2 * exp(-a / s),     P = (x - y) . nu(x)  (or tau(x)),

so every time integral reduces to moments of s^-2 exp(-a/s) against a
polynomial.  On [0, s] these are J_m(s) = s^(m-1) E_m(a/s), which gives the
closed forms used for the most recent interval; older intervals are smooth
in time and use Gauss-Legendre quadrature.
"""
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
from scipy.special import gammaincc

from .geom import grid_rule, pair_geometry, split_log_matrix
from .laplace_pot import build_laplace_ops
from .specfun import UNDERFLOW, expn_all, gauss_legendre, monomial_coeffs

MAX_DEGREE = 4
ANALYTIC_RATIO = 1.5
LOG_TAPER = 6


# ---------------------------------------------------------------------------
# time integrals

@dataclass(frozen=True)
class StageIntegrals:
    I: np.ndarray
    r: float
    tau_i: float
    b: float

    @property
    def a(self):
        return self.r**2 / 4

    @property
    def c(self):
        return self.r**2 / (4 * self.tau_i)


def _jm_all(deg, a, s):
    """J_m(s) = int_0^s sigma^(m-2) exp(-a/sigma) d sigma for m = 0..deg."""
    c = a / s
    E = expn_all(deg, c)
    m = np.arange(deg + 1).reshape((-1,) + (1,) * np.ndim(c))
    return E * s ** (m - 1.0)


def stage_integrals(r, tau_i, dt_sub):
    """I_j = int_alpha^{alpha+tau_i} exp(-r^2/4(alpha+tau_i-tau)) (beta-tau)^j
    / (alpha+tau_i-tau)^2 dtau for j = 0..4, with beta = alpha + dt_sub."""
    if not (r > 0 and tau_i > 0):
        raise ValueError("stage integrals need r > 0 and tau_i > 0")
    if tau_i > dt_sub * (1 + 1e-14):
        raise ValueError("stage time must lie inside the interval")
    b = dt_sub - tau_i
    J = _jm_all(MAX_DEGREE, np.asarray(r * r / 4), tau_i)
    I = np.array([sum(comb(j, m) * b ** (j - m) * J[m] for m in range(j + 1))
                  for j in range(MAX_DEGREE + 1)], dtype=float)
    return StageIntegrals(I, float(r), float(tau_i), float(b))


def time_moments(a, s0, s1, deg, p=8, method="auto"):
    """int_{s0}^{s1} s^-2 exp(-a/s) ((s - s0)/w)^j ds, w = s1 - s0, j = 0..deg.

    Requires a > 0 when s0 = 0.  method: 'auto', 'analytic' or 'gauss'.
    """
    a = np.asarray(a, dtype=float)
    w = s1 - s0
    if method == "auto":
        method = "analytic" if s0 < ANALYTIC_RATIO * w else "gauss"
    if s0 == 0:
        if method == "gauss":
            raise ValueError("the singular interval needs analytic integration")
        J = _jm_all(deg, a, s1)
        m = np.arange(deg + 1).reshape((-1,) + (1,) * a.ndim)
        return J / w**m
    if method == "gauss":
        g = gauss_legendre(p)
        s = s0 + w * (g.points + 1) / 2
        u = (s - s0) / w
        e = np.exp(-a[..., None] / s) * (g.weights * w / 2 / s**2)
        return np.stack([e @ u**j for j in range(deg + 1)])
    # analytic: expand (s - s0)^j in powers of s and difference J_m
    apos = np.where(a > 0, a, 1.0)
    J1, J0 = _jm_all(deg, apos, s1), _jm_all(deg, apos, s0)
    D = J1 - J0
    # J_0 difference without cancellation; the a -> 0 limit is w / (s0 s1)
    c1 = np.minimum(apos / s1, 2 * UNDERFLOW)
    gap = np.exp(-c1) * -np.expm1(-apos * w / (s0 * s1)) / apos
    D[0] = np.where(a > 0, gap, w / (s0 * s1))
    out = np.empty_like(D)
    for j in range(deg + 1):
        acc = sum(comb(j, m) * (-s0) ** (j - m) * D[m] for m in range(j + 1))
        out[j] = acc / w**j
    return out


# ---------------------------------------------------------------------------
# spatial assembly of one time piece

def _projections(grid):
    if "heat_geom" not in grid.cache:
        d, r2 = pair_geometry(grid)
        pn = np.einsum("ijk,ik->ij", d, grid.normals)
        pt = np.einsum("ijk,ik->ij", d, grid.tangents)
        grid.cache["heat_geom"] = (r2 / 4, pn, pt)
    return grid.cache["heat_geom"]


def _singular_monomials(grid, s1, deg):
    """Matrices for the interval s in [0, s1] and monomials (s/s1)^j.

    Returns two lists (normal, tangential) of M x M matrices.
    """
    n = grid.n
    a, pn, pt = _projections(grid)
    apos = a.copy()
    np.fill_diagonal(apos, 1.0)
    J = _jm_all(deg, apos, s1)
    sp = grid.speeds[None, :]
    qw = grid.quad_weights[None, :]
    out_n, out_t = [], []
    c = apos / s1
    # j = 0: exp(-c) (x-y).P / (2 pi r^2); the tangential part is a Cauchy
    # kernel, i.e. the harmonic tangential derivative plus a smooth piece
    ratio_n = -pn / (2 * np.pi * 4 * apos)
    K = ratio_n * np.exp(-np.minimum(c, 2 * UNDERFLOW))
    np.fill_diagonal(K, -grid.curvature / (4 * np.pi))
    out_n.append(K * qw)
    Kt = -pt / (2 * np.pi * 4 * apos) * np.expm1(-np.minimum(c, 2 * UNDERFLOW))
    np.fill_diagonal(Kt, 0.0)
    out_t.append(build_laplace_ops(grid).SLtau + Kt * qw)
    # the log coefficient grows like c^(j-1); taper it away from the diagonal
    # with exp(-c) sum_{m<=K} c^m/m! = 1 - O(c^(K+1)) so nothing large cancels
    taper = gammaincc(LOG_TAPER + 1, c)
    for j in range(1, deg + 1):
        scale = s1**j
        coef = (-apos) ** (j - 1) / (8 * np.pi * factorial(j - 1) * scale)
        if j > 1:
            coef = coef * taper
        for P, out in ((pn, out_n), (pt, out_t)):
            Kf = -P / (8 * np.pi) * J[j] / scale * sp
            K1 = P * coef * sp
            np.fill_diagonal(Kf, 0.0)
            np.fill_diagonal(K1, 0.0)
            out.append(split_log_matrix(grid, Kf, K1, 0.0))
    return out_n, out_t


def piece_matrices(grid, s0, s1, sigma, p=8, method="auto"):
    """Operators mapping densities at elapsed times `sigma` to the normal and
    tangential heat-layer derivatives, for the time piece s in [s0, s1] and
    the Lagrange interpolant through those nodes.

    Returns (list of normal matrices, list of tangential matrices), one per node.
    """
    sigma = np.asarray(sigma, dtype=float)
    deg = len(sigma) - 1
    if deg > MAX_DEGREE:
        raise ValueError("interpolation degree above 4 is not supported")
    w = s1 - s0
    C = monomial_coeffs((sigma - s0) / w)
    if s0 == 0:
        mon_n, mon_t = _singular_monomials(grid, s1, deg)
    else:
        a, pn, pt = _projections(grid)
        mom = time_moments(a, s0, s1, deg, p=p, method=method)
        qw = grid.quad_weights[None, :]
        mon_n = [-pn / (8 * np.pi) * mom[j] * qw for j in range(deg + 1)]
        mon_t = [-pt / (8 * np.pi) * mom[j] * qw for j in range(deg + 1)]
    res_n = [sum(C[j, m] * mon_n[j] for j in range(deg + 1)) for m in range(deg + 1)]
    res_t = [sum(C[j, m] * mon_t[j] for j in range(deg + 1)) for m in range(deg + 1)]
    return res_n, res_t


def piece_kernels(grid, s0, s1, sigma, p=8, method="auto"):
    """Pointwise kernels (off the diagonal) behind piece_matrices, before any
    spatial quadrature.  Returns (normal list, tangential list), diagonal 0."""
    sigma = np.asarray(sigma, dtype=float)
    deg = len(sigma) - 1
    w = s1 - s0
    C = monomial_coeffs((sigma - s0) / w)
    a, pn, pt = _projections(grid)
    apos = a.copy()
    np.fill_diagonal(apos, 1.0)
    mom = time_moments(apos, s0, s1, deg, p=p, method=method)
    kern = np.tensordot(C.T, mom, axes=(1, 0))
    out_n = [-pn / (8 * np.pi) * k for k in kern]
    out_t = [-pt / (8 * np.pi) * k for k in kern]
    for k in out_n + out_t:
        np.fill_diagonal(k, 0.0)
    return out_n, out_t


def piece_gradient(grid, targets, s0, s1, sigma, p=8, method="auto"):
    """Like piece_matrices but for grad_x of the heat single layer at off-surface
    targets: returns a list of arrays of shape (2, m, M), one per node."""
    sigma = np.asarray(sigma, dtype=float)
    deg = len(sigma) - 1
    w = s1 - s0
    C = monomial_coeffs((sigma - s0) / w)
    d, r2 = pair_geometry(grid, targets)
    mom = time_moments(r2 / 4, s0, s1, deg, p=p, method=method)
    qw = grid.quad_weights[None, :]
    dd = np.moveaxis(d, -1, 0)
    mon = [-dd / (8 * np.pi) * mom[j] * qw for j in range(deg + 1)]
    return [sum(C[j, m] * mon[j] for j in range(deg + 1)) for m in range(deg + 1)]


# ---------------------------------------------------------------------------
# local blocks

@dataclass(frozen=True, eq=False)
class LocalHeatBlock:
    A_nu: list
    A_tau: list
    node_times: np.ndarray


def build_local_block(grid, t_left, t_stage, node_times):
    """Coefficient matrices of the densities at `node_times` in the heat-layer
    derivatives at time t_stage, integrated over [t_left, t_stage]."""
    node_times = np.asarray(node_times, dtype=float)
    if len(node_times) - 1 > MAX_DEGREE:
        raise ValueError("too many interpolation nodes (degree > 4)")
    if not t_left < t_stage:
        raise ValueError("empty local interval")
    An, At = piece_matrices(grid, 0.0, t_stage - t_left, t_stage - node_times)
    return LocalHeatBlock(An, At, node_times)


# ---------------------------------------------------------------------------
# direct history evaluation for an arbitrary time grid

@dataclass
class DensityHistory:
    times: np.ndarray
    mu: np.ndarray
    interp_order: int = 1
    rho: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("history times must increase strictly")

    def stencil(self, l):
        """Node indices used on interval [times[l-1], times[l]]."""
        lo = max(0, l - self.interp_order)
        return np.arange(l, lo - 1, -1)


def history_apply(grid, history, t, component="normal", p=8):
    """Normal or tangential heat-layer derivative at time t from every history
    interval that ends strictly before t, by p-point Gauss-Legendre in time."""
    idx = 0 if component == "normal" else 1
    out = np.zeros(grid.n)
    for l in range(1, len(history.times)):
        if history.times[l] >= t:
            break
        st = history.stencil(l)
        s0, s1 = t - history.times[l], t - history.times[l - 1]
        mats = piece_matrices(grid, s0, s1, t - history.times[st], p=p, method="gauss")[idx]
        for A, m in zip(mats, st):
            out += A @ history.mu[m]
    return out


def perp_grad_shp_eval(grid, history, targets, t, p=8, min_sep=5.0):
    """grad-perp of the heat single layer at interior targets and time t, using
    every history interval up to t (analytic in time on recent intervals)."""
    targets = np.atleast_2d(targets)
    g = np.zeros((2, len(targets)))
    for l in range(1, len(history.times)):
        if history.times[l - 1] >= t:
            break
        st = history.stencil(l)
        s0 = max(t - history.times[l], 0.0)
        s1 = t - history.times[l - 1]
        for G, m in zip(piece_gradient(grid, targets, s0, s1, t - history.times[st], p=p), st):
            g += G @ history.mu[m]
    too_close = grid.distance(targets) < min_sep * grid.h
    return np.stack([g[1], -g[0]], -1), too_close


# ---------------------------------------------------------------------------
# translation invariant marching operators

@dataclass(frozen=True)
class Layout:
    """How the density is represented on each period.

    pieces: tuples (left, right, refs) with left/right relative to the period
    start and refs a tuple of (period offset e <= 0, node index q).
    """
    pieces: tuple
    name: str = ""

    @property
    def back(self):
        return max(-e for _, _, refs in self.pieces for e, _ in refs)


def uniform_layout(P, k):
    """One piece per period, degree k through the k + 1 latest step values."""
    return Layout(((0.0, P, tuple((-e, 0) for e in range(k + 1))),), f"uniform{k}")


def substep_layout(P, theta, nref=2):
    """Piecewise polynomials between consecutive nodes, each through the nref
    most recent nodes of the global node sequence."""
    Q = len(theta)
    pieces = []
    for q in range(Q):
        left = theta[q - 1] if q else 0.0
        refs = []
        for b in range(nref):
            g = q - b
            refs.append((-((-g + Q - 1) // Q) if g < 0 else 0, g % Q))
        pieces.append((left, theta[q], tuple(refs)))
    return Layout(tuple(pieces), f"substep{nref}")


def collocation_layout(P, theta):
    return Layout(((0.0, P, tuple((0, q) for q in range(len(theta)))),), "collocation")


class HeatEngine:
    """Precomputed heat-layer operators for a fixed grid and time pattern.

    Periods have length P and carry Q nodes at offsets theta (last = P).
    Node (n, q), n >= 1, sits at time (n-1) P + theta[q]; the node (0, Q-1)
    is t = 0.  Densities live in an array V of shape (N + pad, Q, M) with
    period n at row n + pad - 1.
    """

    def __init__(self, grid, P, theta, N, cur_layout, past_layout, p=8):
        self.grid, self.P, self.N, self.p = grid, float(P), int(N), p
        self.theta = np.asarray(theta, dtype=float)
        self.Q = len(self.theta)
        self.cur_layout, self.past_layout = cur_layout, past_layout
        self.pad = max(cur_layout.back, past_layout.back, 1) + 1
        M = grid.n
        self.cur = [self._current(i) for i in range(self.Q)]
        # past[i] has shape (2M, (N + pad - 1) * Q * M); column block
        # (L - 1) * Q + q multiplies the density at node (n - L, q)
        nblk = self.N + self.pad - 1
        self.past = []
        for i in range(self.Q):
            B = np.zeros((2 * M, nblk * self.Q * M))
            for D in range(1, self.N):
                for left, right, refs in past_layout.pieces:
                    s0 = D * self.P + self.theta[i] - right
                    s1 = D * self.P + self.theta[i] - left
                    sig = [D * self.P + self.theta[i] - (e * self.P + self.theta[q]) for e, q in refs]
                    An, At = piece_matrices(grid, s0, s1, sig, p=p)
                    for (e, q), a_n, a_t in zip(refs, An, At):
                        col = ((D - e - 1) * self.Q + q) * M
                        B[:M, col:col + M] += a_n
                        B[M:, col:col + M] += a_t
            self.past.append(B)

    def _current(self, i):
        blocks = {}
        ti = self.theta[i]
        for left, right, refs in self.cur_layout.pieces:
            if left >= ti:
                continue
            hi = min(right, ti)
            sig = [ti - (e * self.P + self.theta[q]) for e, q in refs]
            An, At = piece_matrices(self.grid, ti - hi, ti - left, sig, p=self.p)
            for (e, q), a_n, a_t in zip(refs, An, At):
                key = (-e, q)
                if key in blocks:
                    blocks[key] = (blocks[key][0] + a_n, blocks[key][1] + a_t)
                else:
                    blocks[key] = (a_n, a_t)
        return blocks

    def new_values(self):
        return np.zeros((self.N + self.pad, self.Q, self.grid.n))

    def row(self, n):
        return n + self.pad - 1

    def node_time(self, n, q):
        return (n - 1) * self.P + self.theta[q]

    def fill_ghosts(self, V):
        """Values at negative times: the line through 0 at t = 0 and node (1, 0)."""
        first = V[self.row(1), 0]
        for m in range(0, -self.pad, -1):
            for q in range(self.Q):
                t = self.node_time(m, q)
                V[self.row(m), q] = 0.0 if abs(t) < 1e-14 * self.P else t / self.theta[0] * first

    def ghost_factor(self, n, L, q):
        """Multiple of V[1, 0] represented by ghost node (n - L, q), else None."""
        m = n - L
        if m > 0:
            return None
        t = self.node_time(m, q)
        return 0.0 if abs(t) < 1e-14 * self.P else t / self.theta[0]

    def past_apply(self, i, n, V):
        """Contribution of periods 1..n-1 to target node (n, i)."""
        M = self.grid.n
        if n <= 1:
            return np.zeros(M), np.zeros(M)
        nb = n + self.pad - 1
        vals = V[:nb][::-1].reshape(-1)
        out = self.past[i][:, : nb * self.Q * M] @ vals
        return out[:M], out[M:]

    def current_apply(self, i, n, V, skip_implicit=True, ghosts=True):
        """Contribution of the current period (excluding node (n, i) itself)."""
        M = self.grid.n
        hn, ht = np.zeros(M), np.zeros(M)
        for (L, q), (a_n, a_t) in self.cur[i].items():
            if skip_implicit and L == 0 and q == i:
                continue
            if not ghosts and n - L <= 0:
                continue
            v = V[self.row(n - L), q]
            hn += a_n @ v
            ht += a_t @ v
        return hn, ht

    def implicit(self, i, n, ghosts=True):
        """Blocks multiplying the unknown at node (n, i); at the very first node
        the ghost values are proportional to it and are folded in."""
        a_n, a_t = self.cur[i][(0, i)]
        if ghosts and n == 1 and i == 0:
            a_n, a_t = a_n.copy(), a_t.copy()
            for (L, q), (b_n, b_t) in self.cur[i].items():
                f = self.ghost_factor(n, L, q)
                if f:
                    a_n += f * b_n
                    a_t += f * b_t
        return a_n, a_t

    def memory_bytes(self):
        return sum(B.nbytes for B in self.past)
