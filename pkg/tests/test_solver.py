import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csie2d.geom import CurveSpec, discretize
from csie2d.solver import GmresError, TimeScheme, eval_velocity, gmres, march
from csie2d.testbed import ErrorMetric, error_report, provider, sample_points


# ---------------------------------------------------------------------------
# GMRES

@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 30), seed=st.integers(0, 2**31 - 1))
def test_gmres_matches_direct_solve(n, seed):
    rng = np.random.default_rng(seed)
    A = np.eye(n) + 0.5 * rng.standard_normal((n, n)) / np.sqrt(n)
    b = rng.standard_normal(n)
    res = gmres(A, b, tol=1e-13)
    assert res.converged and res.iterations <= n
    x = np.linalg.solve(A, b)
    assert np.linalg.norm(res.x - x) <= 1e-10 * np.linalg.norm(x) * np.linalg.cond(A)


def test_gmres_callable_and_zero_rhs():
    A = np.diag([1.0, 2.0, 3.0])
    res = gmres(lambda v: A @ v, np.array([1.0, 2.0, 3.0]))
    assert res.converged and np.allclose(res.x, 1.0)
    zero = gmres(A, np.zeros(3))
    assert zero.converged and zero.iterations == 0 and not zero.x.any()


def test_gmres_breakdowns():
    ok = gmres(np.eye(4), np.arange(1.0, 5.0))
    assert ok.converged and ok.iterations == 1
    # incompatible right-hand side for a singular matrix
    bad = gmres(np.diag([1.0, 0.0]), np.array([0.0, 1.0]))
    assert not bad.converged and bad.breakdown == "unhappy"


def test_gmres_maxit_reported():
    rng = np.random.default_rng(0)
    A = np.eye(20) + rng.standard_normal((20, 20))
    res = gmres(A, rng.standard_normal(20), maxit=3)
    assert not res.converged and res.iterations == 3


# ---------------------------------------------------------------------------
# schemes

def test_scheme_parse():
    s = TimeScheme.parse("pc:k=3", N=40, T=2.0)
    assert (s.kind, s.k, s.N, s.dt) == ("PC", 3, 40, 0.05)
    s = TimeScheme.parse("sdc:k=5,sweeps=4")
    assert (s.kind, s.k, s.sweeps) == ("SDC", 5, 4)
    assert TimeScheme.parse("fi").kind == "FI"
    assert TimeScheme.parse("pc").k == 2


@pytest.mark.parametrize("kw", [
    dict(kind="RK"), dict(N=0), dict(T=0.0), dict(kind="PC", k=1),
    dict(kind="PC", k=4), dict(kind="PC", k=5, unstable_ok=True),
    dict(kind="SDC", k=6), dict(kind="SDC", sweeps=-1),
])
def test_scheme_rejects(kw):
    with pytest.raises(ValueError):
        TimeScheme(**kw)


def test_scheme_pc4_behind_flag():
    assert TimeScheme("PC", k=4, unstable_ok=True).k == 4


# ---------------------------------------------------------------------------
# marching

def _potential_flow(grid, t):
    # u = cos(5t) grad (x1^2 - x2^2)/2 solves the unsteady Stokes equations
    # with pressure -d/dt of the potential
    x = grid.nodes
    u = np.cos(5 * t) * np.stack([x[:, 0], -x[:, 1]], -1)
    return (np.einsum("ij,ij->i", u, grid.normals),
            np.einsum("ij,ij->i", u, grid.tangents))


@pytest.mark.parametrize("text", ["fi", "pc:k=2", "pc:k=3", "sdc:k=3,sweeps=1"])
def test_potential_flow_is_carried_by_rho(ellipse96, text):
    scheme = TimeScheme.parse(text, N=8, T=0.4)
    st_ = march(ellipse96, scheme, _potential_flow)
    pts = sample_points(ellipse96, ErrorMetric(count=8))
    u, close = eval_velocity(st_, pts)
    ue = np.cos(5 * 0.4) * np.stack([pts[:, 0], -pts[:, 1]], -1)
    assert not close.any()
    assert np.linalg.norm(u - ue) <= 1e-9 * np.linalg.norm(ue)
    # mu only picks up the spatial discretization error of SLtau rho - tau.g
    assert np.abs(st_.mu).max() <= 1e-7


def test_zero_data_gives_zero(circle64):
    zero = lambda grid, t: (np.zeros(grid.n), np.zeros(grid.n))
    st_ = march(circle64, TimeScheme.parse("pc:k=2", N=4, T=0.2), zero)
    assert not st_.mu.any() and not st_.rho.any()
    u, _ = eval_velocity(st_, np.array([[0.1, 0.1]]))
    assert not u.any()


def test_eval_velocity_final_time_only(circle64):
    st_ = march(circle64, TimeScheme.parse("fi", N=2, T=0.1), provider())
    eval_velocity(st_, np.array([0.0, 0.0]), 0.1)
    with pytest.raises(ValueError):
        eval_velocity(st_, np.array([0.0, 0.0]), 0.05)


def test_velocity_divergence_free(ellipse96, rng):
    st_ = march(ellipse96, TimeScheme.parse("pc:k=2", N=4, T=0.2), provider())
    # arbitrary densities, not a solution
    st_.mu[...] = rng.standard_normal(st_.mu.shape)
    st_.rho[...] = rng.standard_normal(st_.rho.shape)
    x0, eps = np.array([0.2, -0.05]), 1e-4
    pts = np.array([x0 + [eps, 0], x0 - [eps, 0], x0 + [0, eps], x0 - [0, eps], x0])
    u, _ = eval_velocity(st_, pts)
    div = (u[0, 0] - u[1, 0] + u[2, 1] - u[3, 1]) / (2 * eps)
    assert abs(div) <= 1e-6 * np.linalg.norm(u[4]) / 0.4


def test_deflated_rho_solves_agree(ellipse96):
    pts = sample_points(ellipse96, ErrorMetric(count=6))
    out = []
    for deflate in (False, True):
        st_ = march(ellipse96, TimeScheme.parse("pc:k=2", N=6, T=0.3, deflate=deflate), provider())
        out.append(eval_velocity(st_, pts)[0])
    assert np.linalg.norm(out[0] - out[1]) <= 1e-9 * np.linalg.norm(out[0])


def test_gmres_failure_raises(circle64):
    with pytest.raises(GmresError):
        march(circle64, TimeScheme.parse("fi", N=2, T=0.1, gmres_maxit=2), provider())


def test_fi_converges_second_order():
    g = discretize(CurveSpec.ellipse(0.8, 0.4), 96)
    err = []
    for N in (20, 40):
        st_ = march(g, TimeScheme.parse("fi", N=N, T=0.5), provider())
        err.append(error_report(st_, 0.5).error)
        assert st_.report.mean_iterations() <= 96 + 10
    assert 3 <= err[0] / err[1] <= 6


def test_sdc_correction_reduces_error(circle64):
    err = []
    for sweeps in (0, 1):
        scheme = TimeScheme.parse(f"sdc:k=3,sweeps={sweeps}", N=8, T=0.4)
        err.append(error_report(march(circle64, scheme, provider()), 0.4).error)
    assert err[1] < err[0] / 5


def test_sdc_records_corrections(circle64):
    st_ = march(circle64, TimeScheme.parse("sdc:k=3,sweeps=2", N=3, T=0.15), provider())
    c = st_.report.corrections
    assert [(n, j) for n, j, _, _ in c] == [(n, j) for n in (1, 2, 3) for j in (0, 1)]
    assert all(np.isfinite(v) for row in c for v in row[2:])
