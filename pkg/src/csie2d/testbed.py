"""Manufactured unsteady Stokes solution, boundary data and error metrics.

The exact field is a sum of switched-on/off heat-vortex dipole pulses from
ten sources on the unit circle plus three oscillating potential flows.
"""
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

FREQS = (313 * np.pi, 233 * np.pi, 299 * np.pi)


@dataclass(frozen=True)
class ExactSolutionCfg:
    h: float = 0.1
    nsources: int = 10
    phase: float = 0.0
    pulses: bool = True
    linear: bool = True
    exp_x1: bool = True
    exp_x2: bool = True

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("pulse spacing must be positive")

    @property
    def sources(self):
        ang = 2 * np.pi * np.arange(1, self.nsources + 1) / self.nsources + self.phase
        return np.stack([np.cos(ang), np.sin(ang)], -1)


def _pulse_factor(r2, s):
    """exp(-r2 / 4s) for s > 0, else 0."""
    return np.exp(-r2 / (4 * s)) if s > 0 else np.zeros_like(r2)


def exact_velocity(x, t, cfg=ExactSolutionCfg()):
    """Velocity at points x (shape (2,) or (m, 2)) and time t."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    u = np.zeros_like(x)
    x1, x2 = x[:, 0], x[:, 1]
    if cfg.pulses and t > 0:
        for xj in cfg.sources:
            d1, d2 = x1 - xj[0], x2 - xj[1]
            r2 = d1 * d1 + d2 * d2
            if np.any(r2 == 0):
                raise ValueError("exact velocity evaluated at a source point")
            amp = np.zeros_like(r2)
            for k in range(int(np.floor(t / (2 * cfg.h))) + 1):
                amp += _pulse_factor(r2, t - (2 * k + 1) * cfg.h) \
                    - _pulse_factor(r2, t - (2 * k + 2) * cfg.h)
            u[:, 0] += -d2 / r2 * amp
            u[:, 1] += d1 / r2 * amp
    w1, w2, w3 = FREQS
    if cfg.linear:
        c = t * np.cos(w1 * t)
        u[:, 0] += c * x1
        u[:, 1] -= c * x2
    if cfg.exp_x1:
        c = t * t / 4 * np.cos(w2 * t) * np.exp(x1)
        u[:, 0] += c * np.cos(x2)
        u[:, 1] -= c * np.sin(x2)
    if cfg.exp_x2:
        c = 2 * t * np.sin(w3 * t) * np.exp(x2)
        u[:, 0] += c * np.cos(x1)
        u[:, 1] += c * np.sin(x1)
    return u[0] if single else u


def boundary_data(grid, t, cfg=ExactSolutionCfg()):
    """(nu . g, tau . g) at the grid nodes."""
    g = exact_velocity(grid.nodes, t, cfg)
    return (np.einsum("ij,ij->i", g, grid.normals),
            np.einsum("ij,ij->i", g, grid.tangents))


def provider(cfg=ExactSolutionCfg()):
    return lambda grid, t: boundary_data(grid, t, cfg)


@dataclass(frozen=True)
class ErrorMetric:
    count: int = 20
    separation: float = 5.0       # in units of the grid spacing h
    seed: int = 0


def sample_points(grid, metric=ErrorMetric()):
    """Low-discrepancy points inside the curve, at least separation*h from it."""
    x = grid.curve.derivatives(np.linspace(0, 2 * np.pi, 512, endpoint=False))[0]
    lo, hi = x.min(0), x.max(0)
    sampler = qmc.Halton(d=2, seed=metric.seed)
    out = []
    while len(out) < metric.count:
        cand = lo + (hi - lo) * sampler.random(256)
        ok = grid.curve.contains(cand)
        cand = cand[ok]
        if len(cand):
            cand = cand[grid.distance(cand) >= metric.separation * grid.h]
        out.extend(cand[: metric.count - len(out)])
    return np.array(out)


@dataclass(frozen=True)
class ErrorReport:
    error: float
    points: np.ndarray
    computed: np.ndarray
    exact: np.ndarray


def relative_error(computed, exact):
    den = np.linalg.norm(exact)
    num = np.linalg.norm(np.asarray(computed) - np.asarray(exact))
    if den == 0:
        return float("nan") if num == 0 else float("inf")
    return float(num / den)


def error_report(state, t_final, metric=ErrorMetric(), cfg=ExactSolutionCfg()):
    from .solver import eval_velocity
    pts = sample_points(state.grid, metric)
    u, _ = eval_velocity(state, pts, t_final)
    ue = exact_velocity(pts, t_final, cfg)
    return ErrorReport(relative_error(u, ue), pts, u, ue)
