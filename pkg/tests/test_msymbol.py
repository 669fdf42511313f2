import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mkinetic import msymbol
from mkinetic.msymbol import ExponentMismatch, SymbolParams, WeightedSymbolParams

E1 = np.array([1.0, 0.0, 0.0])


def test_phase_integral_hand_value():
    # int_0^1 1 + (1 - tau)^2 dtau = 1 + 1/3
    assert msymbol.phase_integral(0.0, 1.0, E1, E1) == pytest.approx(4.0 / 3.0, rel=1e-15)
    # eta = 0 reduces to s <xi>^2
    xi = np.array([1.0, 2.0, 2.0])
    assert msymbol.phase_integral(0.5, 2.5, xi, np.zeros(3)) == pytest.approx(2.0 * 10.0)


def test_phase_integral_matches_quadrature():
    rng = np.random.default_rng(1)
    for _ in range(50):
        t = rng.uniform(0, 2)
        T = t + rng.uniform(0, 3)
        xi = rng.normal(0, 4, 3)
        eta = rng.integers(-6, 7, 3).astype(float)
        closed = msymbol.phase_integral(t, T, xi, eta)
        quad = msymbol.phase_integral_quad(t, T, xi, eta)
        assert closed == pytest.approx(quad, rel=1e-11)


def test_phase_integral_broadcasts():
    xi = np.ones((4, 5, 3))
    out = msymbol.phase_integral(np.zeros((4, 5)), np.ones((4, 5)), xi, np.zeros(3))
    assert out.shape == (4, 5)
    np.testing.assert_allclose(out, 4.0)


def test_phase_integral_rejects_bad_input():
    with pytest.raises(ValueError):
        msymbol.phase_integral(1.0, 0.5, E1, E1)
    with pytest.raises(ValueError):
        msymbol.phase_integral(0.0, 1.0, np.ones(2), E1)


def test_eval_m_hand_value():
    sym = SymbolParams(1.0, 0.5)
    assert sym.p == 1.0
    assert msymbol.eval_m(sym, 0.0, 1.0, E1, E1) == pytest.approx(3.0 / 7.0)
    assert msymbol.eval_m(sym, 1.0, 1.0, E1, E1) == 1.0


def test_symbol_params_validation():
    with pytest.raises(ValueError):
        SymbolParams(0.0, 0.5)
    with pytest.raises(ValueError):
        SymbolParams(1.0, -1.0)
    with pytest.raises(ValueError):
        SymbolParams(1.0, 0.5, -2.0)
    assert SymbolParams(2.0, 0.25).dissipation_bound() == pytest.approx(4.0)
    assert not SymbolParams(1.0, 0.5, 0.7).canonical


def test_weighted_symbol_strength():
    w = WeightedSymbolParams(0.5, 1.5, 4)
    assert w.strength == pytest.approx(0.5 * 2**6)
    with pytest.raises(ValueError):
        WeightedSymbolParams(1.0, 2.5, 0)
    with pytest.raises(ValueError):
        WeightedSymbolParams(1.0, 1.0, -1)
    val = msymbol.eval_m_weighted(w, 0.0, 0.1, E1, E1)
    assert val == pytest.approx(msymbol.eval_m(w.as_plain(), 0.0, 0.1, E1, E1))


def test_commutator_symbol_sign_and_fd():
    sym = SymbolParams(2.0, 0.3)
    xi = np.array([1.0, -0.5, 2.0])
    eta = np.array([2.0, 0.0, -1.0])
    c = msymbol.transport_commutator_symbol(sym, 0.5, 1.5, xi, eta)
    assert c < 0
    res = msymbol.commutator_fd_residual(sym, 0.5, 1.5, xi, eta, 1e-4)
    assert res < 1e-6 * abs(c)


def test_commutator_fd_slope_is_second_order():
    rng = np.random.default_rng(3)
    t = rng.uniform(0.5, 1.0, 40)
    T = t + rng.uniform(0.1, 2.0, 40)
    xi = rng.normal(0, 3, (40, 3))
    eta = rng.integers(-4, 5, (40, 3)).astype(float)
    slope, _, _ = msymbol.commutator_fd_slope(SymbolParams(1.0, 0.5), t, T, xi, eta)
    assert slope == pytest.approx(2.0, abs=0.05)


def test_time_integral_closed_form_eta_zero():
    # with eta = 0 and p = 1: int_0^S J (1 + delta J s)^-2 ds = (1 - 1/(1 + delta J S)) / delta
    sym = SymbolParams(3.0, 0.5)
    xi = np.array([2.0, 1.0, 0.0])
    J = 6.0
    S = 0.7
    exact = (1 - 1 / (1 + 3.0 * J * S)) / 3.0
    assert msymbol.time_integral(sym, xi, np.zeros(3), 0.0, S) == pytest.approx(exact, rel=1e-10)


def test_time_integral_bound_and_exponent_guard():
    rng = np.random.default_rng(5)
    sym = SymbolParams(0.7, 0.25)
    for _ in range(20):
        r = msymbol.check_time_integral_bound(sym, rng.normal(0, 5, 3), rng.integers(-5, 6, 3), 0.0, 3.0)
        assert r.passed and r.lhs <= r.rhs
    with pytest.raises(ExponentMismatch):
        msymbol.check_time_integral_bound(SymbolParams(1.0, 0.5, 2.0), E1, E1, 0.0, 1.0)


def test_derivative_bounds_are_finite():
    rng = np.random.default_rng(11)
    n = 20
    t = rng.uniform(0, 1, n)
    pts = msymbol.PhasePoint(t, t + rng.uniform(0.1, 2, n), rng.normal(0, 3, (n, 3)),
                             rng.integers(-4, 5, (n, 3)).astype(float))
    rep = msymbol.check_derivative_bounds(SymbolParams(1.0, 0.5), pts)
    d = rep.as_dict()
    assert d["n_samples"] == n
    for key in ("xi_order1", "xi_order2", "eta_order1", "eta_order2"):
        assert math.isfinite(d[key]) and d[key] > 0


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.01, 10), st.floats(0.05, 2),
    st.lists(st.floats(-20, 20), min_size=3, max_size=3),
    st.lists(st.integers(-8, 8), min_size=3, max_size=3),
    st.floats(0, 2), st.floats(0, 2),
)
def test_m_is_contractive_and_decreasing_in_T(delta, eps, xi, eta, s1, s2):
    sym = SymbolParams(delta, eps)
    xi = np.array(xi)
    eta = np.array(eta, float)
    a, b = sorted((s1, s2))
    ma = msymbol.eval_m(sym, 0.0, a, xi, eta)
    mb = msymbol.eval_m(sym, 0.0, b, xi, eta)
    assert 0 < mb <= ma <= 1.0
