"""Special functions and small 1D interpolation / quadrature helpers.

Everything here is vectorized over numpy arrays and free of global state.
"""
from dataclasses import dataclass
import numpy as np
from scipy.special import roots_jacobi

EULER_GAMMA = 0.57721566490153286061
UNDERFLOW = 700.0


@dataclass(frozen=True)
class Nodes1D:
    points: np.ndarray
    weights: np.ndarray | None = None

    def __len__(self):
        return len(self.points)


def _as_positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("exponential integral needs x > 0")
    return x


def _e1_series(x):
    # E1(x) = -gamma - ln x - sum_{m>=1} (-x)^m / (m m!)
    term = -x
    acc = term.copy()
    for m in range(2, 40):
        term = term * (-x) / m
        acc += term / m
    return -EULER_GAMMA - np.log(x) - acc


def _en_contfrac(n, x):
    # modified Lentz on the continued fraction for E_n, valid for x > 1
    tiny = 1e-300
    b = x + n
    c = np.full(x.shape, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, 500):
        an = -i * (n - 1 + i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return h * np.exp(-x)


def expn_all(nmax, x):
    """E_0(x) .. E_nmax(x) stacked along a new leading axis.

    E_0(x) = exp(-x)/x.  Values for x > 700 are set to zero.
    """
    x = _as_positive(x)
    shape = x.shape
    x = x.ravel()
    out = np.zeros((nmax + 1, x.size))
    small = x <= 1.0
    big = (x > 1.0) & (x <= UNDERFLOW)

    xs = x[small]
    if xs.size:
        ex = np.exp(-xs)
        out[0, small] = ex / xs
        if nmax >= 1:
            e = _e1_series(xs)
            out[1, small] = e
            # upward recurrence is stable for x <= 1
            for n in range(1, nmax):
                e = (ex - xs * e) / n
                out[n + 1, small] = e

    xb = x[big]
    if xb.size:
        ex = np.exp(-xb)
        out[0, big] = ex / xb
        # each order separately: neither recurrence direction is safe near x = 1
        for n in range(1, nmax + 1):
            out[n, big] = _en_contfrac(n, xb)
    return out.reshape((nmax + 1,) + shape)


def exp_integral_e1(x):
    """E1(x) = int_x^inf exp(-t)/t dt for x > 0 (scalar or array)."""
    scalar = np.ndim(x) == 0
    v = expn_all(1, x)[1]
    return float(v) if scalar else v


def e1(x):
    return exp_integral_e1(x)


def radau_right_nodes(k):
    """Right Radau nodes on [0, 1] (last node is 1) with quadrature weights."""
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= 16):
        raise ValueError(f"unsupported Radau stage count {k}")
    if k == 1:
        return Nodes1D(np.array([1.0]), np.array([1.0]))
    # free nodes: zeros of the Jacobi polynomial P_{k-1}^{(1,0)} on [-1, 1]
    z, _ = roots_jacobi(k - 1, 1.0, 0.0)
    pts = np.concatenate([np.sort((z + 1.0) / 2.0), [1.0]])
    # weights by exact integration of the Lagrange basis
    g, gw = np.polynomial.legendre.leggauss(k)
    g = (g + 1.0) / 2.0
    w = lagrange_basis(pts, g).T @ (gw / 2.0)
    return Nodes1D(pts, w)


def gauss_legendre(p):
    if not (isinstance(p, (int, np.integer)) and 1 <= p <= 64):
        raise ValueError(f"unsupported Gauss-Legendre point count {p}")
    x, w = np.polynomial.legendre.leggauss(p)
    return Nodes1D(x, w)


def lagrange_basis(nodes, t):
    """Matrix L[i, j] = ell_j(t_i) of Lagrange basis polynomials.

    Rows sum to one, so the same weights serve interpolation and
    extrapolation.
    """
    x = np.asarray(getattr(nodes, "points", nodes), dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if len(np.unique(x)) != len(x):
        raise ValueError("duplicate interpolation nodes")
    n = len(x)
    L = np.ones((t.size, n))
    for j in range(n):
        for m in range(n):
            if m != j:
                L[:, j] *= (t - x[m]) / (x[j] - x[m])
    return L


def lagrange_weights(nodes, t):
    return lagrange_basis(nodes, t)[0]


def lagrange_eval(nodes, values, t):
    """Evaluate the interpolant of values at t; values may carry trailing axes."""
    w = lagrange_weights(nodes, t)
    return np.tensordot(w, np.asarray(values, dtype=float), axes=(0, 0))


def monomial_coeffs(nodes):
    """C with p(u) = sum_j u^j sum_m C[j, m] v_m for the interpolant through (nodes, v)."""
    u = np.asarray(nodes, dtype=float)
    V = np.vander(u, len(u), increasing=True)
    return np.linalg.inv(V)

