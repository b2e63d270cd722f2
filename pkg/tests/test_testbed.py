import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csie2d.geom import CurveSpec, discretize
from csie2d.specfun import e1
from csie2d.testbed import (
    FREQS, ErrorMetric, ExactSolutionCfg, boundary_data, exact_velocity,
    relative_error, sample_points,
)


def _scalar_fields(x, t, cfg):
    """Stream function and potential of the exact field, written independently:
    the pulse part is grad-perp of E1(r^2/4s)/2 summed over switch times, the
    rest is grad of three harmonic potentials."""
    x = np.atleast_2d(x)
    psi = np.zeros(len(x))
    for src in cfg.sources:
        r2 = np.sum((x - src) ** 2, axis=1)
        for k, t_sw in enumerate(np.arange(cfg.h, t, cfg.h)):
            sign = 1.0 if k % 2 == 0 else -1.0
            s = t - t_sw
            if s > 0:
                psi += sign * 0.5 * e1(r2 / (4 * s))
    w1, w2, w3 = FREQS
    x1, x2 = x[:, 0], x[:, 1]
    phi = (t * np.cos(w1 * t) * (x1**2 - x2**2) / 2
           + t * t / 4 * np.cos(w2 * t) * np.exp(x1) * np.cos(x2)
           + 2 * t * np.sin(w3 * t) * np.exp(x2) * np.sin(x1))
    return psi, phi


def _velocity_by_differences(x, t, cfg, eps=1e-5):
    out = np.zeros_like(x)
    for i, e in enumerate(np.eye(2)):
        pp, fp = _scalar_fields(x + eps * e, t, cfg)
        pm, fm = _scalar_fields(x - eps * e, t, cfg)
        dpsi, dphi = (pp - pm) / (2 * eps), (fp - fm) / (2 * eps)
        out[:, i] += dphi
        # grad-perp = (d2, -d1)
        out[:, 1 - i] += dpsi if i == 1 else -dpsi
    return out


@pytest.mark.parametrize("t", [0.05, 0.37, 1.0, 1.93])
def test_exact_velocity_dual_route(t):
    cfg = ExactSolutionCfg()
    rng = np.random.default_rng(7)
    x = rng.uniform(-0.6, 0.6, (12, 2))
    ref = _velocity_by_differences(x, t, cfg)
    got = exact_velocity(x, t, cfg)
    assert np.max(np.abs(got - ref)) <= 1e-7 * np.max(np.abs(ref))


def test_exact_velocity_term_switches():
    x = np.array([[0.1, -0.2], [0.3, 0.05]])
    full = exact_velocity(x, 0.7)
    parts = [ExactSolutionCfg(pulses=p, linear=l, exp_x1=a, exp_x2=b)
             for p, l, a, b in np.eye(4, dtype=bool)]
    assert np.allclose(sum(exact_velocity(x, 0.7, c) for c in parts), full, rtol=1e-14, atol=1e-15)
    off = ExactSolutionCfg(pulses=False, linear=False, exp_x1=False, exp_x2=False)
    assert not exact_velocity(x, 0.7, off).any()


def test_exact_velocity_causal():
    # nothing is switched on before t = 0 and the pulses start at t = h
    x = np.array([[0.2, 0.1]])
    assert not exact_velocity(x, 0.0).any()
    only_pulses = ExactSolutionCfg(linear=False, exp_x1=False, exp_x2=False)
    assert not exact_velocity(x, 0.1, only_pulses).any()
    assert exact_velocity(x, 0.3, only_pulses).any()


def test_exact_velocity_shapes_and_errors():
    assert exact_velocity(np.array([0.1, 0.2]), 0.5).shape == (2,)
    assert exact_velocity(np.zeros((3, 2)), 0.5).shape == (3, 2)
    with pytest.raises(ValueError):
        exact_velocity(ExactSolutionCfg().sources[3], 0.5)
    with pytest.raises(ValueError):
        ExactSolutionCfg(h=0.0)


@settings(max_examples=30, deadline=None)
@given(x1=st.floats(-0.5, 0.5), x2=st.floats(-0.5, 0.5), t=st.floats(0.0, 2.0))
def test_exact_velocity_divergence_free(x1, x2, t):
    eps = 1e-5
    x0 = np.array([x1, x2])
    u = exact_velocity(np.array([x0 + [eps, 0], x0 - [eps, 0], x0 + [0, eps], x0 - [0, eps]]), t)
    div = (u[0, 0] - u[1, 0] + u[2, 1] - u[3, 1]) / (2 * eps)
    scale = max(np.abs(u).max(), 1e-12)
    assert abs(div) <= 1e-6 * scale


@pytest.mark.parametrize("spec", [CurveSpec.circle(0.5), CurveSpec.ellipse(0.8, 0.4),
                                  CurveSpec.hexagram()], ids=str)
@pytest.mark.parametrize("t", [0.13, 0.5, 1.0, 1.7])
def test_boundary_flux_vanishes(spec, t):
    g = discretize(spec, 256)
    gn, gt = boundary_data(g, t)
    w = g.quad_weights
    mean = (w @ gn) / w.sum()
    assert abs(mean) <= 1e-10 * max(np.abs(gn).max(), 1.0)
    assert gt.shape == gn.shape == (256,)


@pytest.mark.parametrize("spec", [CurveSpec.circle(0.5), CurveSpec.ellipse(0.8, 0.4),
                                  CurveSpec.hexagram()], ids=str)
def test_sample_points(spec):
    g = discretize(spec, 128)
    m = ErrorMetric(count=20, separation=5.0, seed=3)
    pts = sample_points(g, m)
    assert pts.shape == (20, 2)
    assert np.all(spec.contains(pts))
    assert np.all(g.distance(pts) >= 5.0 * g.h)
    assert np.array_equal(pts, sample_points(g, m))
    assert not np.array_equal(pts, sample_points(g, ErrorMetric(seed=4)))


def test_relative_error():
    assert relative_error([1.0, 1.0], [1.0, 1.0]) == 0.0
    assert relative_error([2.0, 0.0], [1.0, 0.0]) == 1.0
    assert np.isnan(relative_error([0.0], [0.0]))
    assert relative_error([1.0], [0.0]) == np.inf
