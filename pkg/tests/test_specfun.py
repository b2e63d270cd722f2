import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csie2d.specfun import (expn_all, exp_integral_e1, gauss_legendre, lagrange_eval,
                            lagrange_weights, monomial_coeffs, radau_right_nodes)

from oracles import CLOSED_RADAU, e1_by_quadrature, en_by_quadrature, radau_by_roots


def test_e1_log_grid_against_quadrature():
    xs = np.geomspace(1e-12, 700, 57)
    ours = exp_integral_e1(xs)
    ref = np.array([float(e1_by_quadrature(x)) for x in xs])
    assert np.max(np.abs(ours / ref - 1)) <= 1e-13


@pytest.mark.parametrize("x", [1e-8, 0.3, 0.999, 1.0, 1.001, 2.5, 17.0, 150.0, 699.0])
def test_en_orders_against_quadrature(x):
    ours = expn_all(4, np.array([x]))[:, 0]
    assert ours[0] == pytest.approx(math.exp(-x) / x, rel=1e-15)
    for n in range(1, 5):
        assert ours[n] == pytest.approx(float(en_by_quadrature(n, x)), rel=5e-14)


def test_underflow_regime_is_zero():
    assert np.all(expn_all(4, np.array([700.5, 1e4])) == 0.0)


def test_e1_rejects_nonpositive():
    with pytest.raises(ValueError):
        exp_integral_e1(0.0)
    with pytest.raises(ValueError):
        exp_integral_e1(np.array([1.0, -2.0]))


@given(st.floats(min_value=1e-6, max_value=600.0))
@settings(max_examples=60, deadline=None)
def test_en_recurrence_holds(x):
    # n E_{n+1}(x) = exp(-x) - x E_n(x)
    E = expn_all(4, np.array([x]))[:, 0]
    for n in range(1, 4):
        lhs, rhs = n * E[n + 1], math.exp(-x) - x * E[n]
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), math.exp(-x))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_radau_closed_forms(k):
    nd = radau_right_nodes(k)
    pts, wts = CLOSED_RADAU[k]
    assert np.max(np.abs(nd.points - pts)) <= 1e-14
    assert np.max(np.abs(nd.weights - wts)) <= 1e-14


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_radau_nodes_match_polynomial_oracle(k):
    nd = radau_right_nodes(k)
    assert np.max(np.abs(nd.points - radau_by_roots(k))) <= 1e-14
    assert nd.points[-1] == 1.0


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 8])
def test_radau_exactness_degree(k):
    nd = radau_right_nodes(k)
    for d in range(2 * k - 1):
        assert nd.weights @ nd.points**d == pytest.approx(1 / (d + 1), abs=1e-14)


def test_radau_rejects_bad_count():
    with pytest.raises(ValueError):
        radau_right_nodes(0)


@pytest.mark.parametrize("p", [1, 4, 8, 20])
def test_gauss_legendre_exactness(p):
    g = gauss_legendre(p)
    for d in range(2 * p):
        exact = 0.0 if d % 2 else 2.0 / (d + 1)
        assert g.weights @ g.points**d == pytest.approx(exact, abs=1e-13)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=5),
       st.floats(-2.0, 4.0))
@settings(max_examples=80, deadline=None)
def test_lagrange_reproduces_polynomials_including_extrapolation(coef, t):
    nodes = np.linspace(0.0, 1.0, len(coef))
    p = np.polynomial.Polynomial(coef)
    got = lagrange_eval(nodes, p(nodes), t)
    assert got == pytest.approx(p(t), abs=1e-9 * (1 + abs(p(t))))


def test_lagrange_weights_sum_to_one_and_reject_duplicates():
    w = lagrange_weights([0.0, 0.3, 1.0], 2.5)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        lagrange_weights([0.0, 0.0], 0.5)


def test_monomial_coeffs_inverts_vandermonde():
    u = np.array([0.0, 0.25, 0.7, 1.0])
    C = monomial_coeffs(u)
    V = np.vander(u, 4, increasing=True)
    assert np.allclose(V @ C, np.eye(4), atol=1e-12)
