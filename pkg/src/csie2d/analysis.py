"""Fourier-mode analysis of the fully implicit system on a circle, plus
nullspace and conditioning studies for assembled matrices.

On a circle of radius r every operator in the fully implicit system is a
convolution, so the 2M x 2M matrix splits into 2 x 2 blocks per mode k:

    [[1/2,            b_k],
     [-(i/2) sgn k,   a_k]]      (k != 0),       diag(0, lambda0) for k = 0.
"""
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .geom import CurveSpec, discretize
from .laplace_pot import build_laplace_ops, null_vector
from .specfun import exp_integral_e1


@dataclass(frozen=True)
class SymbolBlock:
    k: int
    a_k: complex
    b_k: complex
    block: np.ndarray
    eigvals: np.ndarray
    singvals: np.ndarray


def _quad(f, k):
    # integrands are symmetric about u = pi; split the half period finely
    # enough to follow cos(ku) / sin(ku)
    edges = np.linspace(0.0, np.pi, max(4, abs(k) // 2 + 4))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += quad(f, lo, hi, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    return 2 * total


def symbol_a(k, r, dt):
    def f(u):
        c = r * r * np.sin(u / 2) ** 2 / dt
        e1 = exp_integral_e1(c) if c > 0 else 0.0
        return (-np.exp(-c) / (4 * np.pi)
                + r * r / (8 * np.pi * dt) * (1 - np.cos(u)) * e1) * np.cos(k * u)

    return 0.5 + _quad(f, k)


def symbol_b(k, r, dt):
    if k == 0:
        return 0j

    def f(u):
        c = r * r * np.sin(u / 2) ** 2 / dt
        if u == 0.0:
            return abs(k) * np.sign(k) / (2 * np.pi)
        e1 = exp_integral_e1(c) if c > 0 else 0.0
        return (np.exp(-c) / (np.tan(u / 2) * 4 * np.pi)
                - r * r / (8 * np.pi * dt) * np.sin(u) * e1) * np.sin(k * u)

    return 1j * _quad(f, k)


def _panel_rule(r, dt, kmax, order=24):
    """Composite Gauss-Legendre nodes on [0, pi]: geometric panels resolve
    the exp(-c) boundary layer of width ~ sqrt(dt)/r at u = 0, uniform panels
    follow cos(ku) up to kmax."""
    scale = min(np.sqrt(dt) / r, 1.0)
    edges = np.union1d(np.geomspace(1e-6 * scale, np.pi, 60),
                       np.linspace(0.0, np.pi, kmax // 2 + 9))
    edges = np.concatenate([[0.0], edges[edges > 0]])
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    u = (0.5 * (hi - lo) * x + 0.5 * (hi + lo)).ravel()
    return u, (0.5 * (hi - lo) * w).ravel()


def symbols(r, dt, ks):
    """(a_k, b_k) for all k in ks at once; same integrals as symbol_a and
    symbol_b, evaluated with one fixed panel rule."""
    ks = np.asarray(ks)
    u, w = _panel_rule(r, dt, int(np.abs(ks).max()))
    c = r * r * np.sin(u / 2) ** 2 / dt
    e1 = exp_integral_e1(c)
    fa = -np.exp(-c) / (4 * np.pi) + r * r / (8 * np.pi * dt) * (1 - np.cos(u)) * e1
    fb = np.exp(-c) / (np.tan(u / 2) * 4 * np.pi) - r * r / (8 * np.pi * dt) * np.sin(u) * e1
    ku = np.outer(ks, u)
    a = 0.5 + 2 * (np.cos(ku) * fa) @ w
    b = 2j * (np.sin(ku) * fb) @ w
    return a, b


def lambda0(r, dt):
    """(1/2 I + A_nu)[1] on the circle: the k = 0 entry of the normal row."""
    if not (r > 0 and dt > 0):
        raise ValueError("lambda0 needs r > 0 and dt > 0")
    return float(symbol_a(0, r, dt))


def _block(k, a, b):
    if k == 0:
        return np.array([[0.0, 0.0], [0.0, a]], dtype=complex)
    return np.array([[0.5, b], [-0.5j * np.sign(k), a]], dtype=complex)


def symbol(k, r, dt):
    a = symbol_a(k, r, dt)
    b = symbol_b(k, r, dt)
    B = _block(k, a, b)
    return SymbolBlock(k, complex(a), complex(b), B, np.linalg.eigvals(B),
                       np.linalg.svd(B, compute_uv=False))


def symbol_asymptotic(k, r, dt):
    """Large-|k| forms: a_k, b_k and the eigenvalue pair of the 2 x 2 block."""
    if k == 0:
        raise ValueError("asymptotic symbols need k != 0")
    x = r * r / (8 * dt * k * k)
    a = 0.5 - r * r / (4 * dt * abs(k) ** 3)
    b = 1j * np.sign(k) * (0.5 - r * r / (4 * dt * k * k))
    return a, b, (1 - x, x)


def mode_matrix_action(A, n, k):
    """Return the 2 x 2 block that the 2n x 2n matrix A induces on mode k."""
    s = 2 * np.pi * np.arange(n) / n
    e = np.exp(1j * k * s)
    out = np.empty((2, 2), dtype=complex)
    for col in range(2):
        v = np.zeros(2 * n, dtype=complex)
        v[col * n:(col + 1) * n] = e
        w = A @ v
        out[0, col] = np.vdot(e, w[:n]) / n
        out[1, col] = np.vdot(e, w[n:]) / n
    return out


def fi_matrix(grid, dt):
    from .solver import fi_assemble
    from .heat_pot import build_local_block
    blk = build_local_block(grid, -dt, 0.0, [0.0, -dt])
    return fi_assemble(grid, build_laplace_ops(grid), blk)


@dataclass(frozen=True)
class SpectrumComparison:
    numeric: np.ndarray       # dense eigenvalue magnitudes, sorted decreasing
    exact: np.ndarray         # Fourier block eigenvalue magnitudes, same order
    asymptotic: np.ndarray
    excluded: float           # near-null eigenvalue magnitude
    nyquist: np.ndarray       # eigenvalue magnitudes of the unresolved k = n/2 mode


def spectrum_compare(r, n, dt):
    """Dense eigenvalues of the assembled circle system against the Fourier
    block eigenvalues for |k| < n/2.

    The near-null eigenvalue and the Nyquist pair are removed from the dense
    list; the Nyquist block is read off the matrix, since the discretization
    drops its Hilbert parts and no continuous symbol describes it.
    """
    if n > 512:
        raise ValueError("dense eigen analysis limited to n <= 512")
    grid = discretize(CurveSpec.circle(r), n)
    A = fi_matrix(grid, dt)
    ev = list(np.abs(np.linalg.eigvals(A)))
    excluded = min(ev)
    ev.remove(excluded)
    nyq = np.abs(np.linalg.eigvals(mode_matrix_action(A, n, n // 2)))
    for v in nyq:
        ev.pop(int(np.argmin(np.abs(np.asarray(ev) - v))))
    ks = np.arange(-n // 2 + 1, n // 2)
    a, b = symbols(r, dt, ks)
    exact, asym = [], []
    for k, ak, bk in zip(ks, a, b):
        if k == 0:
            exact.append(abs(ak.real))
            asym.append(0.5)
        else:
            exact.extend(np.abs(np.linalg.eigvals(_block(k, ak, bk))))
            asym.extend(np.abs(symbol_asymptotic(k, r, dt)[2]))
    return SpectrumComparison(np.sort(ev)[::-1], np.sort(exact)[::-1],
                              np.sort(asym)[::-1], float(excluded), np.sort(nyq)[::-1])


def _null_direction(grid):
    rho0 = null_vector(grid)
    return np.concatenate([rho0, np.zeros(grid.n)])


def condition_number(A, null_dir):
    """sigma_max / sigma_min' with the singular triplet best aligned with
    null_dir removed."""
    U, S, Vt = np.linalg.svd(A)
    align = np.abs(Vt @ null_dir) / np.linalg.norm(null_dir)
    keep = np.ones(len(S), bool)
    j = int(np.argmax(align))
    if align[j] >= 0.99:
        keep[j] = False
    else:
        keep[-1] = False
    return S[0] / S[keep].min()


def condition_sweep(r, n, dt_list):
    if n > 512:
        raise ValueError("dense SVD limited to n <= 512")
    grid = discretize(CurveSpec.circle(r), n)
    nd = _null_direction(grid)
    return np.array([condition_number(fi_matrix(grid, dt), nd) for dt in dt_list])


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass(frozen=True)
class NullspaceReport:
    sigma_min_ratio: float
    sigma_2_ratio: float
    jump_residual: float
    tangent_residual: float
    mu_fraction: float


def nullspace_check(grid, dt):
    A = fi_matrix(grid, dt)
    U, S, Vt = np.linalg.svd(A)
    v = Vt[-1]
    ops = build_laplace_ops(grid)
    rho0 = null_vector(grid)
    return NullspaceReport(
        S[-1] / S[0], S[-2] / S[0],
        float(np.linalg.norm(0.5 * rho0 + ops.SLnu @ rho0)),
        float(np.linalg.norm(ops.SLtau @ rho0)),
        float(np.linalg.norm(v[grid.n:]) / np.linalg.norm(v)),
    )
