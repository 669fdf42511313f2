import math
import warnings

import numpy as np
import pytest
from scipy.special import erf

from mkinetic import landau
from mkinetic.landau import LandauOperator, ModelParams, ToyOperator
from mkinetic.spectral import Field, PhaseGrid, read_snapshot


@pytest.fixture(scope="module")
def vgrid():
    return PhaseGrid(1, 1, 32, 8.0)


@pytest.fixture(scope="module")
def maxwellian(vgrid):
    v = vgrid.v_mesh()
    m = np.exp(-(v[0] ** 2 + v[1] ** 2 + v[2] ** 2) / 2) / (2 * math.pi) ** 1.5
    return Field(m.copy(), vgrid)


@pytest.fixture(scope="module")
def coeffs(maxwellian):
    return landau.compute_coefficients(maxwellian)


def anisotropic(g):
    v = g.v_mesh()
    f = np.exp(-(v[0] ** 2 / 0.5 + (v[1] - 0.5) ** 2 + v[2] ** 2 / 2) / 2)
    return f / (f.sum() * g.dv3)


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(nu=-1)
    with pytest.raises(ValueError):
        ModelParams(beta=3)
    with pytest.raises(ValueError):
        ModelParams(m=3)


def test_newtonian_potential_of_gaussian(vgrid, coeffs):
    # a = erf(r / sqrt 2) / (4 pi r) for a unit Gaussian; node 18 is v = (1, 0, 0)
    assert vgrid.v_nodes()[18] == 1.0
    ref = erf(1 / math.sqrt(2)) / (4 * math.pi)
    assert coeffs.a[0, 18, 16, 16] == pytest.approx(ref, rel=1e-9)
    # a'(r) = (sqrt(2/pi) e^{-r^2/2} r - erf(r/sqrt 2)) / (4 pi r^2)
    dref = (math.sqrt(2 / math.pi) * math.exp(-0.5) - erf(1 / math.sqrt(2))) / (4 * math.pi)
    assert coeffs.grad_a[0, 0, 18, 16, 16] == pytest.approx(dref, rel=1e-9)
    assert coeffs.a[0, 16, 16, 16] == pytest.approx(1 / (4 * math.pi) * math.sqrt(2 / math.pi), rel=1e-9)


def test_structural_identities(coeffs):
    scale = np.abs(coeffs.a).max()
    assert np.abs(coeffs.trace() - coeffs.a).max() < 1e-12 * scale
    np.testing.assert_array_equal(coeffs.A, np.swapaxes(coeffs.A, 0, 1))
    assert coeffs.min_eigenvalue() > -1e-3 * scale
    assert coeffs.max_eigenvalue() <= scale * (1 + 1e-12)


def test_maxwellian_drift_balance(vgrid, coeffs):
    # A v = -grad a for a centred Maxwellian, so the Landau flux vanishes
    v = vgrid.v_mesh()
    Av = [sum(coeffs.A[i, j] * v[j] for j in range(3)) for i in range(3)]
    err = max(np.abs(Av[i] + coeffs.grad_a[i]).max() for i in range(3))
    assert err < 1e-8 * np.abs(coeffs.grad_a).max()


def test_maxwellian_is_equilibrium(vgrid, maxwellian):
    op = LandauOperator(vgrid, 0.0, conservative=False)
    q_eq = np.abs(op(maxwellian.values)).max()
    q_other = np.abs(op(anisotropic(vgrid))).max()
    assert q_eq < 1e-6
    assert q_eq < 1e-3 * q_other


def test_divergence_matches_gradient(vgrid, maxwellian):
    fast = landau.compute_grad_a(maxwellian)
    div = landau.divergence_A_oversampled(maxwellian)
    assert np.linalg.norm(div - fast) / np.linalg.norm(fast) < 1e-8
    # the narrow anisotropic field is only marginally resolved at n_v = 32
    f = Field(anisotropic(vgrid), vgrid)
    fast = landau.compute_grad_a(f)
    assert np.linalg.norm(landau.divergence_A_oversampled(f) - fast) / np.linalg.norm(fast) < 1e-6


def test_partial_coefficient_paths(vgrid, maxwellian, coeffs):
    np.testing.assert_allclose(landau.compute_a(maxwellian), coeffs.a, atol=1e-15)
    np.testing.assert_allclose(landau.compute_A(maxwellian), coeffs.A, atol=1e-15)
    no_a = landau.compute_coefficients(maxwellian, with_a=False)
    assert no_a.a is None
    assert landau.landau_kernels(32, 8.0) is landau.landau_kernels(32, 8.0)


def test_shell_warning(vgrid):
    vals = np.ones(vgrid.shape)
    with pytest.warns(RuntimeWarning):
        landau.compute_a(Field(vals, vgrid))


def test_coefficient_constants(maxwellian):
    c = landau.coefficient_constants(maxwellian, 4.0)
    assert set(c) == {"A_over_a", "c_A", "c_grad_a", "grad_a_L6_over_f_L2"}
    assert 0 < c["A_over_a"] <= 1 + 1e-12
    assert c["grad_a_L6_over_f_L2"] <= 1.0


def test_export_coefficients(tmp_path, vgrid, coeffs):
    paths = landau.export_coefficients(coeffs, vgrid, tmp_path, time=0.5)
    assert len(paths) == 10
    back = read_snapshot(tmp_path / "A01.mkin")
    np.testing.assert_array_equal(back.values, coeffs.A[0, 1])
    assert back.time == 0.5


def test_conservative_projection():
    g = PhaseGrid(1, 2, 32, 8.0)
    base = anisotropic(g)
    vals = np.broadcast_to(base, g.shape) * np.array([1.0, 0.5]).reshape(2, 1, 1, 1)
    nu = 0.01
    op = LandauOperator(g, nu, conservative=True)
    Q = op(np.ascontiguousarray(vals))
    v = g.v_mesh()
    mass = vals.sum(axis=g.v_axes) * g.dv3
    q_mass = Q.sum(axis=g.v_axes) * g.dv3
    q_mom = [(Q * v[i]).sum(axis=g.v_axes) * g.dv3 for i in range(3)]
    q_en = (Q * (v[0] ** 2 + v[1] ** 2 + v[2] ** 2)).sum(axis=g.v_axes) * g.dv3
    np.testing.assert_allclose(q_mass, 0.0, atol=1e-14)
    for m in q_mom:
        np.testing.assert_allclose(m, 0.0, atol=1e-14)
    np.testing.assert_allclose(q_en, 6 * nu * mass, rtol=1e-12)
    assert 0 < op.last_defect < 1e-2


def test_landau_rhs_wrapper(maxwellian):
    out = landau.landau_rhs(maxwellian, ModelParams(nu=0.0))
    assert out.values.shape == maxwellian.values.shape
    assert np.abs(out.values).max() < 1e-6


def test_toy_operator_heat_kernel():
    # rho * Lap M = rho (|v|^2 - 3) M for a unit Maxwellian
    g = PhaseGrid(1, 4, 32, 8.0)
    v = g.v_mesh()
    r2 = v[0] ** 2 + v[1] ** 2 + v[2] ** 2
    m = np.exp(-r2 / 2) / (2 * math.pi) ** 1.5
    f = Field(np.broadcast_to(m, g.shape).copy(), g)
    rho = np.array([0.5, 1.0, 1.5, 2.0])
    out = landau.toy_rhs(f, ModelParams(), rho=rho)
    exact = rho.reshape(4, 1, 1, 1) * (r2 - 3) * m
    # Gaussian spectrum at the v Nyquist is e^{-2 pi^2}, about 3e-9
    assert np.abs(out.values - exact).max() < 1e-7 * np.abs(exact).max()


def test_toy_operator_weighted_divergence_form():
    g = PhaseGrid(1, 2, 16, 6.0)
    op = ToyOperator(g, 1.0)
    rng = np.random.default_rng(0)
    vals = rng.uniform(0, 1, g.shape)
    out = op(vals, np.array([1.0, 2.0]))
    np.testing.assert_allclose(out.sum(axis=g.v_axes), 0.0, atol=1e-10)
    assert op.max_coefficient(np.array([1.0, 2.0])) == pytest.approx(2.0 * math.sqrt(1 + 3 * 36))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ToyOperator(g, -1.0)(vals, np.ones(2))
