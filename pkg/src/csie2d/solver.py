"""Time marching for the combined source integral equation

    1/2 rho + SLnu rho + SHtau mu =  nu . g
    1/2 mu  + SHnu mu  - SLtau rho = -tau . g

with the velocity represented as grad S_L[rho] + grad-perp S_H[mu].

Three drivers share one HeatEngine: the fully implicit scheme (FI), the
predictor-corrector scheme PC(k) and spectral deferred correction (SDC) built
on PC(2) at right Radau stages.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from .heat_pot import (HeatEngine, build_local_block, collocation_layout,
                       piece_gradient, substep_layout, uniform_layout)
from .laplace_pot import build_laplace_ops, grad_slp_eval, null_vector
from .specfun import lagrange_weights, radau_right_nodes


class GmresError(RuntimeError):
    pass


@dataclass(frozen=True)
class GmresResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool
    breakdown: str = ""      # "", "happy" or "unhappy"


def gmres(apply, rhs, tol=1e-12, maxit=None):
    """Unrestarted GMRES from x0 = 0 with modified Gram-Schmidt and Givens
    rotations.  `apply` is a matrix or a callable.  Converged means
    ||b - A x|| <= tol ||b||.

    A zero Arnoldi vector is a breakdown: "happy" when the Krylov space holds
    the solution, "unhappy" when the projected matrix is singular.
    """
    A = apply if callable(apply) else (lambda v, _M=np.asarray(apply): _M @ v)
    b = np.asarray(rhs, dtype=float)
    n = b.size
    maxit = 4 * n if maxit is None else maxit
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return GmresResult(np.zeros(n), 0, 0.0, True)
    m = min(maxit, n)
    V = np.zeros((m + 1, n))
    H = np.zeros((m + 1, m))
    cs, sn = np.zeros(m), np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = bnorm
    V[0] = b / bnorm
    breakdown = ""
    its = 0
    for j in range(m):
        w = A(V[j])
        for i in range(j + 1):
            H[i, j] = V[i] @ w
            w = w - H[i, j] * V[i]
        h = np.linalg.norm(w)
        H[j + 1, j] = h
        for i in range(j):
            H[i, j], H[i + 1, j] = (cs[i] * H[i, j] + sn[i] * H[i + 1, j],
                                    -sn[i] * H[i, j] + cs[i] * H[i + 1, j])
        d = np.hypot(H[j, j], h)
        if d == 0:
            breakdown = "unhappy"
            break
        cs[j], sn[j] = H[j, j] / d, h / d
        H[j, j], H[j + 1, j] = d, 0.0
        g[j + 1], g[j] = -sn[j] * g[j], cs[j] * g[j]
        its = j + 1
        if abs(g[j + 1]) <= tol * bnorm:
            break
        if h <= 1e-15 * d:
            breakdown = "happy"
            break
        V[j + 1] = w / h
    x = np.zeros(n)
    if its:
        x = V[:its].T @ np.linalg.solve(np.triu(H[:its, :its]), g[:its])
    res = np.linalg.norm(b - A(x)) / bnorm
    # the recursive residual can undershoot the true one by rounding; allow 10x
    converged = breakdown != "unhappy" and res <= 10 * tol
    if breakdown == "happy" and not converged:
        breakdown = "unhappy"
    return GmresResult(x, its, res, converged, breakdown)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeScheme:
    kind: str = "FI"          # "FI", "PC" or "SDC"
    N: int = 10
    T: float = 1.0
    k: int = 1                # PC order or SDC stage count
    sweeps: int = 0
    gmres_tol: float = 1e-12
    gmres_maxit: int | None = None
    deflate: bool = False
    time_quad: int = 8
    unstable_ok: bool = False

    def __post_init__(self):
        if self.kind not in ("FI", "PC", "SDC"):
            raise ValueError(f"unknown scheme {self.kind}")
        if self.N < 1 or not self.T > 0:
            raise ValueError("need N >= 1 and T > 0")
        if self.kind == "PC" and not (2 <= self.k <= 3 or (self.k == 4 and self.unstable_ok)):
            raise ValueError("PC order must be 2 or 3 (4 only when explicitly allowed)")
        if self.kind == "SDC" and not (1 <= self.k <= 5):
            raise ValueError("SDC supports at most 5 stages (interpolation degree <= 4)")
        if self.sweeps < 0:
            raise ValueError("sweeps must be nonnegative")

    @property
    def dt(self):
        return self.T / self.N

    @staticmethod
    def parse(text, N=10, T=1.0, **kw):
        """'fi', 'pc:k=2', 'sdc:k=5,sweeps=4'."""
        kind, _, rest = text.partition(":")
        opts = {}
        for item in filter(None, rest.split(",")):
            key, _, val = item.partition("=")
            opts[key.strip()] = int(val)
        kind = kind.strip().upper()
        k = opts.get("k", 1 if kind == "FI" else 2 if kind == "PC" else 5)
        return TimeScheme(kind, N, T, k, opts.get("sweeps", 0), **kw)


@dataclass
class SolveReport:
    iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    wall: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    corrections: list = field(default_factory=list)   # (interval, sweep, |dmu|/|mu|, |drho|/|rho|)

    def add(self, label, res):
        self.labels.append(label)
        self.iterations.append(res.iterations)
        self.residuals.append(res.residual)

    def mean_iterations(self, label=None):
        its = [i for l, i in zip(self.labels, self.iterations) if label is None or l == label]
        return float(np.mean(its)) if its else 0.0


@dataclass
class MarchState:
    grid: object
    scheme: TimeScheme
    engine: HeatEngine
    mu: np.ndarray            # (N + pad, Q, M) node values, HeatEngine layout
    rho: np.ndarray           # same shape
    layout: object            # how mu is represented for evaluation
    report: SolveReport
    steps: int = 0


def fi_assemble(grid, laplace, local):
    """[[I/2 + SLnu, A_tau[0]], [-SLtau, I/2 + A_nu[0]]]."""
    M = grid.n
    I = 0.5 * np.eye(M)
    return np.block([[I + laplace.SLnu, local.A_tau[0]],
                     [-laplace.SLtau, I + local.A_nu[0]]])


def _solve(A, rhs, scheme, report, label):
    res = gmres(A, rhs, scheme.gmres_tol, scheme.gmres_maxit)
    report.add(label, res)
    if not res.converged:
        raise GmresError(f"GMRES failed at {label}: residual {res.residual:.3e} "
                         f"after {res.iterations} iterations ({res.breakdown or 'maxit'})")
    return res.x


def _compatible(grid, rhs, scheme, report, label):
    """Project the Neumann-type right-hand side onto the range if asked."""
    w = grid.quad_weights
    mean = (w @ rhs) / w.sum()
    if abs(mean) > 1e-8 * max(np.abs(rhs).max(), 1e-300):
        report.warnings.append(f"{label}: rhs normal mean {mean:.3e}")
    return rhs - mean if scheme.deflate else rhs


def _rho_solve(grid, A, rhs, scheme, report, label):
    """Solve the rank-one deficient (I/2 + SLnu) rho = rhs.

    Without --deflate GMRES runs on the system as is.  If that fails (a small
    right-hand side with a rounding-level incompatible part can push GMRES
    into the null direction) the deflated solve is applied with a warning:
    the rhs is projected onto the range and A + rho0 w^T/|w| is solved, which
    is nonsingular and has the same solutions orthogonal to w.
    """
    if not scheme.deflate:
        res = gmres(A, rhs, scheme.gmres_tol, scheme.gmres_maxit)
        if res.converged:
            report.add("rho", res)
            return res.x
        report.warnings.append(f"{label}: plain rho solve failed "
                               f"(residual {res.residual:.1e}), deflated")
    key = "deflated_rho"
    if key not in grid.cache:
        w = grid.quad_weights
        grid.cache[key] = A + np.outer(null_vector(grid), w / np.linalg.norm(w))
    w = grid.quad_weights
    rhs = rhs - (w @ rhs) / w.sum()
    return _solve(grid.cache[key], rhs, scheme, report, "rho")


def _extrapolate(times, values, t, order):
    """Degree-min(order, len-1) extrapolant through the most recent nodes."""
    deg = min(order, len(times) - 1)
    if deg < 0:
        return np.zeros_like(values[0]) if len(values) else None
    ts = np.asarray(times[-(deg + 1):])
    w = lagrange_weights(ts, t)
    return np.tensordot(w, np.asarray(values[-(deg + 1):]), axes=(0, 0))


class _Sequence:
    """Global node sequence of an engine (time-ordered)."""

    def __init__(self, eng):
        self.eng = eng

    def previous(self, n, i, count, V, real_only=True):
        """Up to `count` nodes before (n, i): lists of times and values."""
        eng = self.eng
        times, vals = [], []
        m, q = n, i
        for _ in range(count):
            q -= 1
            if q < 0:
                m, q = m - 1, eng.Q - 1
            t = eng.node_time(m, q)
            if real_only and t < -1e-14 * eng.P:
                break
            times.append(t)
            vals.append(V[eng.row(m), q])
        return times[::-1], vals[::-1]


def _data(provider, grid, t):
    gn, gt = provider(grid, t)
    return np.asarray(gn, float), np.asarray(gt, float)


def march(grid, scheme, provider, engine=None):
    """Run a scheme to T.  `provider(grid, t)` returns (nu.g, tau.g) at the nodes."""
    t0 = time.perf_counter()
    ops = build_laplace_ops(grid)
    if scheme.kind == "SDC":
        state = _sdc(grid, scheme, provider, ops)
    else:
        state = _uniform(grid, scheme, provider, ops)
    state.report.wall["march"] = time.perf_counter() - t0
    return state


def _uniform(grid, scheme, provider, ops):
    P, N, M = scheme.dt, scheme.N, grid.n
    k = 1 if scheme.kind == "FI" else scheme.k
    # PC(k) interpolates and extrapolates through k nodes (order k); FI is
    # the linear implicit rule
    lay = uniform_layout(P, max(k - 1, 1))
    t0 = time.perf_counter()
    eng = HeatEngine(grid, P, [P], N, lay, lay, p=scheme.time_quad)
    report = SolveReport()
    report.wall["setup"] = time.perf_counter() - t0
    mu, rho = eng.new_values(), eng.new_values()
    state = MarchState(grid, scheme, eng, mu, rho, lay, report)
    I = 0.5 * np.eye(M)
    seq = _Sequence(eng)
    A_fi = {}
    for n in range(1, N + 1):
        t = eng.node_time(n, 0)
        gn, gt = _data(provider, grid, t)
        first = n == 1
        pn, pt = eng.past_apply(0, n, mu)
        An, At = eng.implicit(0, n)
        if scheme.kind == "FI":
            cn, ct = eng.current_apply(0, n, mu, ghosts=not first)
            key = first
            if key not in A_fi:
                A_fi[key] = np.block([[I + ops.SLnu, At], [-ops.SLtau, I + An]])
            r1 = _compatible(grid, gn - pt - ct, scheme, report, f"step {n}")
            x = _solve(A_fi[key], np.concatenate([r1, -gt - pn - cn]), scheme, report, "fi")
            rho[eng.row(n), 0], mu[eng.row(n), 0] = x[:M], x[M:]
        else:
            # k-th order predictor: degree k-1 through the k latest values
            times, vals = seq.previous(n, 0, k, mu)
            mu[eng.row(n), 0] = _extrapolate(times, vals, t, k - 1)
            if first:
                eng.fill_ghosts(mu)
            cn, ct = eng.current_apply(0, n, mu, skip_implicit=False)
            r1 = _compatible(grid, gn - pt - ct, scheme, report, f"step {n}")
            rho[eng.row(n), 0] = _rho_solve(grid, I + ops.SLnu, r1, scheme, report, f"step {n}")
            cn, ct = eng.current_apply(0, n, mu, ghosts=not first)
            r2 = -gt - pn - cn + ops.SLtau @ rho[eng.row(n), 0]
            mu[eng.row(n), 0] = _solve(I + An, r2, scheme, report, "mu")
        if first:
            eng.fill_ghosts(mu)
        state.steps = n
    return state


def _sdc(grid, scheme, provider, ops):
    N, Q, M = scheme.N, scheme.k, grid.n
    P = scheme.dt
    theta = radau_right_nodes(Q).points * P
    theta[-1] = P
    sub = substep_layout(P, theta, 2)
    col = collocation_layout(P, theta)
    past = col if scheme.sweeps > 0 else sub
    t0 = time.perf_counter()
    base = HeatEngine(grid, P, theta, N, sub, past, p=scheme.time_quad)
    resid = HeatEngine.__new__(HeatEngine) if scheme.sweeps > 0 else None
    if resid is not None:
        # the collocation engine shares the past operators with the base engine
        resid.__dict__.update(base.__dict__)
        resid.cur_layout = col
        resid.cur = [resid._current(i) for i in range(Q)]
    report = SolveReport()
    report.wall["setup"] = time.perf_counter() - t0
    mu, rho = base.new_values(), base.new_values()
    state = MarchState(grid, scheme, base, mu, rho, past, report)
    I = 0.5 * np.eye(M)
    seq = _Sequence(base)
    ImSL = I + ops.SLnu
    implicit = {}

    def imp(i, n, ghosts=True):
        key = (i, n == 1 and ghosts)
        if key not in implicit:
            implicit[key] = I + base.implicit(i, n, ghosts)[0]
        return implicit[key]

    for n in range(1, N + 1):
        data = [_data(provider, grid, base.node_time(n, i)) for i in range(Q)]
        # base sweep: PC(2) on the Radau substeps
        for i in range(Q):
            t = base.node_time(n, i)
            gn, gt = data[i]
            first = n == 1 and i == 0
            times, vals = seq.previous(n, i, 2, mu)
            mu[base.row(n), i] = _extrapolate(times, vals, t, 1)
            if first:
                base.fill_ghosts(mu)
            pn, pt = base.past_apply(i, n, mu)
            cn, ct = base.current_apply(i, n, mu, skip_implicit=False)
            r1 = _compatible(grid, gn - pt - ct, scheme, report, f"interval {n}")
            rho[base.row(n), i] = _rho_solve(grid, ImSL, r1, scheme, report, f"interval {n}")
            cn, ct = base.current_apply(i, n, mu, ghosts=not first)
            r2 = -gt - pn - cn + ops.SLtau @ rho[base.row(n), i]
            mu[base.row(n), i] = _solve(imp(i, n), r2, scheme, report, "mu")
            if first:
                base.fill_ghosts(mu)
        # correction sweeps
        for sweep in range(scheme.sweeps):
            R1, R2 = [], []
            for i in range(Q):
                gn, gt = data[i]
                pn, pt = resid.past_apply(i, n, mu)
                cn, ct = resid.current_apply(i, n, mu, skip_implicit=False)
                r, m_ = rho[resid.row(n), i], mu[resid.row(n), i]
                R1.append(gn - ImSL @ r - pt - ct)
                R2.append(-gt + ops.SLtau @ r - 0.5 * m_ - pn - cn)
            dmu, drho = base.new_values(), np.zeros((Q, M))
            for i in range(Q):
                t = base.node_time(n, i)
                times, vals = seq.previous(n, i, 2, dmu, real_only=False)
                dmu[base.row(n), i] = _extrapolate(times, vals, t, 1)
                cn, ct = base.current_apply(i, n, dmu, skip_implicit=False, ghosts=False)
                r1 = _compatible(grid, R1[i] - ct, scheme, report, f"interval {n} correction")
                drho[i] = _rho_solve(grid, ImSL, r1, scheme, report, f"interval {n}")
                cn, ct = base.current_apply(i, n, dmu, ghosts=False)
                r2 = R2[i] - cn + ops.SLtau @ drho[i]
                dmu[base.row(n), i] = _solve(imp(i, n, ghosts=False), r2, scheme, report, "mu")
            rho[base.row(n)] += drho
            mu[base.row(n)] += dmu[base.row(n)]
            report.corrections.append(
                (n, sweep, np.linalg.norm(dmu[base.row(n)]) / max(np.linalg.norm(mu[base.row(n)]), 1e-300),
                 np.linalg.norm(drho) / max(np.linalg.norm(rho[base.row(n)]), 1e-300)))
        if n == 1:
            base.fill_ghosts(mu)
        state.steps = n
    return state


# ---------------------------------------------------------------------------

def eval_velocity(state, targets, t=None):
    """grad S_L[rho(T)] + grad-perp S_H[mu] at interior targets, at the final
    node of the march (the only time for which the whole history is stored).

    Returns (velocity (m, 2), too_close flags).
    """
    eng, grid = state.engine, state.grid
    n_last = state.steps
    T = eng.node_time(n_last, eng.Q - 1)
    if t is not None and abs(t - T) > 1e-12 * max(1.0, T):
        raise ValueError("velocity is available at the final march time only")
    targets = np.atleast_2d(targets)
    g = np.zeros((2, len(targets)))
    for m in range(1, n_last + 1):
        for left, right, refs in state.layout.pieces:
            start = (m - 1) * eng.P
            s0 = max(T - (start + right), 0.0)
            s1 = T - (start + left)
            if s1 <= 0:
                continue
            sig = [T - eng.node_time(m + e, q) for e, q in refs]
            for G, (e, q) in zip(piece_gradient(grid, targets, s0, s1, sig, p=eng.p), refs):
                g += G @ state.mu[eng.row(m + e), q]
    heat = np.stack([g[1], -g[0]], -1)
    lap, close = grad_slp_eval(grid, state.rho[eng.row(n_last), eng.Q - 1], targets)
    return lap + heat, close
