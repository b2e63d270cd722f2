"""Harmonic single layer potential with G_L(x) = -ln|x| / (2 pi).

The stored matrices exclude the +-1/2 jump terms, which are added when a
system is assembled.
"""
from dataclasses import dataclass

import numpy as np

from .geom import grid_hilbert, grid_rule, pair_geometry, split_log_matrix

TWO_PI = 2 * np.pi


@dataclass(frozen=True, eq=False)
class LaplaceOps:
    SL: np.ndarray
    SLnu: np.ndarray
    SLtau: np.ndarray


def _offdiag_ratio(num, r2):
    out = np.zeros_like(r2)
    mask = r2 > 0
    out[mask] = num[mask] / r2[mask]
    return out


def slp_matrix(grid, rule=None):
    n = grid.n
    d, r2 = pair_geometry(grid)
    sp = grid.speeds
    s = grid.params
    with np.errstate(divide="ignore"):
        K = -np.log(r2) / (4 * np.pi) * sp[None, :]
    K1 = np.broadcast_to(-sp[None, :] / (4 * np.pi), (n, n)).copy()
    diag = -sp / (4 * np.pi) * np.log(sp**2)
    np.fill_diagonal(K, 0.0)
    return split_log_matrix(grid, K, K1, diag, rule)


def slp_normal_matrix(grid):
    # smooth kernel -(x-y).nu_x / (2 pi r^2), diagonal limit -kappa/(4 pi)
    d, r2 = pair_geometry(grid)
    pn = np.einsum("ijk,ik->ij", d, grid.normals)
    K = -_offdiag_ratio(pn, r2) / TWO_PI
    np.fill_diagonal(K, -grid.curvature / 2 / TWO_PI)
    return K * grid.quad_weights[None, :]


def slp_tangent_matrix(grid):
    """p.v. tangential derivative: -H/2 plus a smooth correction."""
    n = grid.n
    d, r2 = pair_geometry(grid)
    pt = np.einsum("ijk,ik->ij", d, grid.tangents)
    s = grid.params
    diff = s[None, :] - s[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        smooth = _offdiag_ratio(pt, r2) * grid.speeds[None, :] + 0.5 / np.tan(diff / 2)
    q = np.einsum("ik,ik->i", grid.dgamma, grid.d2gamma) / grid.speeds**2
    smooth[np.diag_indices(n)] = -0.5 * q
    return -0.5 * grid_hilbert(grid) - smooth / TWO_PI * (TWO_PI / n)


def build_laplace_ops(grid, rule=None):
    rule = rule or grid_rule(grid)
    key = "laplace_ops"
    if key not in grid.cache:
        grid.cache[key] = LaplaceOps(slp_matrix(grid, rule), slp_normal_matrix(grid),
                                     slp_tangent_matrix(grid))
    return grid.cache[key]


def null_vector(grid):
    """Unit null vector rho0 of (I/2 + SLnu), by inverse iteration."""
    if "rho0" not in grid.cache:
        ops = build_laplace_ops(grid)
        A = 0.5 * np.eye(grid.n) + ops.SLnu
        # shifted so the solve is well posed; the null direction dominates
        B = A + 1e-14 * np.linalg.norm(A, 1) * np.eye(grid.n)
        v = np.ones(grid.n) / np.sqrt(grid.n)
        for _ in range(4):
            v = np.linalg.solve(B, v)
            v /= np.linalg.norm(v)
        grid.cache["rho0"] = v * np.sign(v.sum())
    return grid.cache["rho0"]


def grad_slp_eval(grid, density, targets, min_sep=5.0):
    """grad S_L[density] at interior targets by the plain trapezoid rule.

    Returns (values of shape (m, 2), too_close flags).
    """
    targets = np.atleast_2d(targets)
    d, r2 = pair_geometry(grid, targets)
    w = grid.quad_weights * np.asarray(density, dtype=float)
    g = -np.einsum("ijk,ij->ik", d, w[None, :] / r2) / TWO_PI
    too_close = grid.distance(targets) < min_sep * grid.h
    return g, too_close
