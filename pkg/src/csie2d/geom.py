"""Closed analytic curves, their Nystrom discretization and the periodic
singular quadratures used by every boundary operator.

Curves are parametrized by s in [0, 2*pi) and traversed counterclockwise.
Log-singular kernels are handled by the product rule for ln(4 sin^2((t-s)/2))
on an equispaced grid, which is spectrally accurate for analytic data.
"""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CurveSpec:
    kind: str
    params: tuple

    @staticmethod
    def circle(r=1.0):
        if not r > 0:
            raise ValueError("circle radius must be positive")
        return CurveSpec("circle", (float(r),))

    @staticmethod
    def ellipse(a=0.8, b=0.4):
        if not a >= b > 0:
            raise ValueError("ellipse needs a >= b > 0")
        return CurveSpec("ellipse", (float(a), float(b)))

    @staticmethod
    def star(r0=0.5, amp=0.15, lobes=6):
        # r(theta) = r0 (1 + amp cos(lobes theta)); amp * lobes < 1 keeps the
        # curve simple with a moderate curvature range
        if not (r0 > 0 and amp >= 0 and int(lobes) >= 1 and amp * int(lobes) < 1):
            raise ValueError("self-intersecting or invalid star: need r0 > 0, "
                             "amp >= 0, lobes >= 1 and amp * lobes < 1")
        return CurveSpec("star", (float(r0), float(amp), int(lobes)))

    @staticmethod
    def hexagram():
        """Six-lobed smooth star used for the convergence tables."""
        return CurveSpec.star(0.5, 0.15, 6)

    @staticmethod
    def parse(text):
        """Parse 'circle:r=0.5', 'ellipse:a=0.8,b=0.4', 'star:r0=0.5,amp=0.15,lobes=6'
        or a bare preset name ('circle', 'ellipse', 'hexagram')."""
        kind, _, rest = text.partition(":")
        if kind.strip() == "hexagram" and not rest:
            return CurveSpec.hexagram()
        kw = {}
        for item in filter(None, rest.split(",")):
            key, _, val = item.partition("=")
            kw[key.strip()] = float(val)
        kind = kind.strip()
        if kind == "star" and "lobes" in kw:
            kw["lobes"] = int(kw["lobes"])
        try:
            make = {"circle": CurveSpec.circle, "ellipse": CurveSpec.ellipse,
                    "star": CurveSpec.star}[kind]
        except KeyError:
            raise ValueError(f"unknown geometry {kind!r}") from None
        return make(**kw)

    def __str__(self):
        names = {"circle": ("r",), "ellipse": ("a", "b"), "star": ("r0", "amp", "lobes")}
        return self.kind + ":" + ",".join(f"{k}={v:g}" for k, v in zip(names[self.kind], self.params))

    def derivatives(self, s):
        """gamma(s), gamma'(s), gamma''(s) as arrays of shape (len(s), 2)."""
        s = np.asarray(s, dtype=float)
        c, sn = np.cos(s), np.sin(s)
        if self.kind == "circle":
            (r,) = self.params
            x = r * np.stack([c, sn], -1)
            return x, r * np.stack([-sn, c], -1), -x
        if self.kind == "ellipse":
            a, b = self.params
            x = np.stack([a * c, b * sn], -1)
            return x, np.stack([-a * sn, b * c], -1), -x
        r0, amp, m = self.params
        rho = r0 * (1 + amp * np.cos(m * s))
        drho = -r0 * amp * m * np.sin(m * s)
        d2rho = -r0 * amp * m * m * np.cos(m * s)
        e = np.stack([c, sn], -1)
        ep = np.stack([-sn, c], -1)
        x = rho[:, None] * e
        dx = drho[:, None] * e + rho[:, None] * ep
        d2x = (d2rho - rho)[:, None] * e + 2 * drho[:, None] * ep
        return x, dx, d2x

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        if self.kind == "circle":
            return np.hypot(pts[:, 0], pts[:, 1]) < self.params[0]
        if self.kind == "ellipse":
            a, b = self.params
            return (pts[:, 0] / a) ** 2 + (pts[:, 1] / b) ** 2 < 1
        r0, amp, m = self.params
        th = np.arctan2(pts[:, 1], pts[:, 0])
        return np.hypot(pts[:, 0], pts[:, 1]) < r0 * (1 + amp * np.cos(m * th))


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    curve: CurveSpec
    n: int
    params: np.ndarray
    nodes: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    speeds: np.ndarray
    quad_weights: np.ndarray
    curvature: np.ndarray
    dgamma: np.ndarray
    d2gamma: np.ndarray
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def h(self):
        """Largest node spacing in arclength."""
        return float(self.quad_weights.max())

    @property
    def perimeter(self):
        return float(self.quad_weights.sum())

    def distance(self, pts, fine=4096):
        """Distance from points to the curve, from a dense resampling."""
        s = np.linspace(0, 2 * np.pi, fine, endpoint=False)
        x = self.curve.derivatives(s)[0]
        pts = np.atleast_2d(pts)
        d = np.hypot(pts[:, None, 0] - x[None, :, 0], pts[:, None, 1] - x[None, :, 1])
        return d.min(axis=1)


def discretize(spec, n):
    """Equispaced-parameter discretization with analytic geometric data."""
    if n < 16 or n % 2:
        raise ValueError("node count must be even and at least 16")
    s = 2 * np.pi * np.arange(n) / n
    x, dx, d2x = spec.derivatives(s)
    sp = np.hypot(dx[:, 0], dx[:, 1])
    tau = dx / sp[:, None]
    nu = np.stack([tau[:, 1], -tau[:, 0]], -1)
    kappa = (dx[:, 0] * d2x[:, 1] - dx[:, 1] * d2x[:, 0]) / sp**3
    return BoundaryGrid(spec, n, s, x, nu, tau, sp, sp * 2 * np.pi / n, kappa, dx, d2x)


@dataclass(frozen=True)
class SingularRule:
    """Product quadrature for ln(4 sin^2((t-s)/2)) on n equispaced points.

    R[i, j] integrates ln(4 sin^2((t_i - s)/2)) f(s) ds for the trigonometric
    interpolant of f.  Spectrally accurate, so `order` is reported as inf.
    """
    n: int
    row: np.ndarray
    order: float = np.inf

    @staticmethod
    def build(n):
        j = np.arange(n)
        m = np.arange(1, n // 2)
        t = 2 * np.pi * j / n
        row = -(4 * np.pi / n) * (np.cos(np.outer(t, m)) / m).sum(1) \
            - (4 * np.pi / n**2) * np.cos(n * t / 2)
        return SingularRule(n, row)

    def matrix(self):
        idx = (np.arange(self.n)[None, :] - np.arange(self.n)[:, None]) % self.n
        return self.row[idx]


def log_matrix(n):
    """ln(4 sin^2((t_i - s_j)/2)) with zero diagonal."""
    t = 2 * np.pi * np.arange(n) / n
    d = t[:, None] - t[None, :]
    with np.errstate(divide="ignore"):
        L = np.log(4 * np.sin(d / 2) ** 2)
    np.fill_diagonal(L, 0.0)
    return L


def grid_rule(grid):
    key = "singular_rule"
    if key not in grid.cache:
        grid.cache[key] = SingularRule.build(grid.n)
        grid.cache["log_matrix"] = log_matrix(grid.n)
    return grid.cache[key]


def split_log_matrix(grid, K, K1, diag, rule=None):
    """Nystrom matrix for a kernel K(t, s) = K1 ln(4 sin^2((t-s)/2)) + K2.

    K and K1 are given per (target, source) pair and already include the
    source speed |gamma'(s)|; `diag` is the diagonal limit of K2.
    """
    rule = rule or grid_rule(grid)
    L = grid.cache["log_matrix"]
    K2 = K - K1 * L
    K2[np.diag_indices(grid.n)] = diag
    return K1 * rule.matrix() + K2 * (2 * np.pi / grid.n)


def log_singular_apply(grid, kernel, density, rule=None):
    """Apply int kernel(t, s) density(s) ds with kernel = (K, K1, diag).

    `kernel(grid)` must return the full kernel K, the log coefficient K1 and
    the diagonal limit of the smooth remainder (all including the speed).
    """
    K, K1, diag = kernel(grid)
    return split_log_matrix(grid, K, K1, diag, rule) @ np.asarray(density, dtype=float)


def hilbert_matrix(n):
    """Periodic Hilbert transform H[e^{iks}] = -i sgn(k) e^{iks}, Nyquist mode dropped."""
    k = np.fft.fftfreq(n, 1.0 / n)
    sym = -1j * np.sign(k)
    if n % 2 == 0:
        sym[n // 2] = 0.0
    F = np.fft.fft(np.eye(n), axis=0)
    return np.real(np.fft.ifft(sym[:, None] * F, axis=0))


def pv_cotangent_apply(grid, amplitude, density):
    """amplitude(t) * (1/2pi) p.v. int cot((t - s)/2) density(s) ds, done spectrally."""
    density = np.asarray(density, dtype=float)
    k = np.fft.fftfreq(grid.n, 1.0 / grid.n)
    sym = -1j * np.sign(k)
    sym[grid.n // 2] = 0.0
    return np.asarray(amplitude) * np.real(np.fft.ifft(sym * np.fft.fft(density)))


def grid_hilbert(grid):
    if "hilbert" not in grid.cache:
        grid.cache["hilbert"] = hilbert_matrix(grid.n)
    return grid.cache["hilbert"]


def pair_geometry(grid, targets=None):
    """Differences x - y and squared distances for kernel assembly."""
    x = grid.nodes if targets is None else np.atleast_2d(targets)
    d = x[:, None, :] - grid.nodes[None, :, :]
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    return d, r2
