import math

import numpy as np
import pytest

from mkinetic import spectral
from mkinetic.spectral import Field, PhaseGrid


@pytest.fixture
def grid():
    return PhaseGrid(1, 16, 16, 6.0)


def gaussian_field(g, rho=1.0):
    v = g.v_mesh()
    m = np.exp(-(v[0] ** 2 + v[1] ** 2 + v[2] ** 2) / 2) / (2 * math.pi) ** 1.5
    x = g.x_mesh()[0]
    return Field(np.broadcast_to(rho * (1 + 0.2 * np.cos(x)) * m, g.shape).copy(), g)


def test_grid_geometry():
    g = PhaseGrid(3, 8, 16, 4.0)
    assert g.shape == (8, 8, 8, 16, 16, 16)
    assert g.dv == 0.5
    assert g.dxi == pytest.approx(math.pi / 4)
    assert g.v_nodes()[0] == -4.0
    assert g.weight(2.0)[8, 8, 8] == 1.0
    with pytest.raises(ValueError):
        PhaseGrid(2, 8, 8, 1.0)
    with pytest.raises(ValueError):
        PhaseGrid(1, 12, 8, 1.0)
    with pytest.raises(ValueError):
        PhaseGrid(1, 8, 8, 0.0)


def test_japanese():
    assert spectral.japanese([3.0, 0.0, 4.0]) == pytest.approx(math.sqrt(26))


def test_roundtrip_and_parseval(grid):
    rng = np.random.default_rng(0)
    f = Field(rng.normal(size=grid.shape), grid)
    F = spectral.forward(f)
    assert F.l2() == pytest.approx(f.l2(), rel=1e-13)
    back = spectral.inverse(F)
    np.testing.assert_allclose(back.values, f.values, atol=1e-13)


def test_apply_multiplier_identity(grid):
    f = gaussian_field(grid)
    F = spectral.forward(f)
    G = spectral.apply_multiplier(F, lambda eta, xi: np.ones(1))
    np.testing.assert_allclose(spectral.inverse(G).values, f.values, atol=1e-14)


def test_transport_shear_exact(grid):
    # f = cos(x) g(v)  ->  cos(x - t v1) g(v)
    x = grid.x_mesh()[0]
    v = grid.v_mesh()
    gv = np.exp(-(v[0] ** 2 + v[1] ** 2 + v[2] ** 2))
    f = Field(np.broadcast_to(np.cos(x) * gv, grid.shape).copy(), grid)
    dt = 3 * grid.dxi
    out = spectral.transport_shear(f, dt)
    np.testing.assert_allclose(out.values, np.cos(x - dt * v[0]) * gv, atol=1e-13)
    assert out.time == pytest.approx(dt)
    assert out.l2() == pytest.approx(f.l2(), rel=1e-13)


def test_transport_requires_alignment(grid):
    f = gaussian_field(grid)
    assert spectral.is_aligned(2 * grid.dxi, grid)
    with pytest.raises(ValueError):
        spectral.transport_shear(f, 0.3 * grid.dxi)
    assert spectral.transport_shear(f, 0.0).values is not f.values


def test_totals_of_gaussian(grid):
    f = gaussian_field(grid, rho=2.0)
    tot = spectral.totals(f)
    # mass = 2 * 2 pi, energy = 3 * mass for unit temperature; the +-6 box cuts a 1e-8 tail
    assert tot.mass == pytest.approx(4 * math.pi, rel=1e-7)
    assert tot.energy == pytest.approx(12 * math.pi, rel=1e-6)
    # the unpaired node v = -6 leaves a small negative momentum
    assert np.all(tot.momentum < 0) and np.all(tot.momentum > -1e-6)
    rho = spectral.density(f)
    np.testing.assert_allclose(rho, 2 * (1 + 0.2 * np.cos(grid.x_nodes())), rtol=1e-7)
    assert len(tot.as_row()) == 5


@pytest.mark.parametrize("kernel", ["bump", "fejer"])
def test_mollify_preserves_mass_and_sign(grid, kernel):
    f = gaussian_field(grid)
    out = spectral.mollify(f, 0.8, kernel=kernel)
    assert spectral.totals(out).mass == pytest.approx(spectral.totals(f).mass, rel=1e-12)
    assert out.values.min() > -1e-14
    assert spectral.mollify(f, 0.8, kernel=kernel).l2() <= f.l2() * (1 + 1e-12)


def test_mollify_errors(grid):
    f = gaussian_field(grid)
    with pytest.raises(ValueError):
        spectral.mollify(f, 0.0)
    with pytest.raises(ValueError):
        spectral.mollify(f, 1.0, kernel="box")


def test_mollify_density_constant(grid):
    rho = np.full(grid.x_shape, 3.0)
    for kernel in ("bump", "fejer"):
        np.testing.assert_allclose(spectral.mollify_density(rho, grid, 0.5, kernel), 3.0, rtol=1e-13)
    with pytest.raises(ValueError):
        spectral.mollify_density(np.ones(3), grid, 0.5)


def test_weighted_norms(grid):
    f = gaussian_field(grid)
    assert spectral.weighted_sup_norm(f, 0.0) == pytest.approx(f.values.max())
    r = spectral.shell_ratio(f.values, grid, 0.0)
    # outermost cell on the short side of the box sits at |v1| = 5.25
    assert r == pytest.approx(math.exp(-(5.25**2) / 2), rel=1e-12)
    assert spectral.shell_ratio(np.zeros(grid.shape), grid, 2.0) == 0.0


def test_snapshot_roundtrip(tmp_path, grid):
    f = gaussian_field(grid)
    f.time = 1.25
    p = tmp_path / "s.mkin"
    spectral.write_snapshot(p, f)
    raw = p.read_bytes()
    assert raw[:5] == b"MKIN1"
    assert len(raw) == 5 + 12 + 16 + 8 * f.values.size
    g = spectral.read_snapshot(p)
    assert g.grid == grid and g.time == 1.25
    np.testing.assert_array_equal(g.values, f.values)


def test_snapshot_corruption(tmp_path, grid):
    p = tmp_path / "s.mkin"
    spectral.write_snapshot(p, gaussian_field(grid))
    data = p.read_bytes()
    (tmp_path / "bad.mkin").write_bytes(b"XXXXX" + data[5:])
    (tmp_path / "short.mkin").write_bytes(data[:-8])
    (tmp_path / "tiny.mkin").write_bytes(data[:10])
    for name in ("bad", "short", "tiny"):
        with pytest.raises(ValueError):
            spectral.read_snapshot(tmp_path / f"{name}.mkin")


def test_density_csv(tmp_path, grid):
    p = tmp_path / "d.csv"
    spectral.write_density_csv(p, [0.0, 0.5], [np.ones(16), 2 * np.ones(16)], grid, ["seed=1"])
    lines = p.read_text().splitlines()
    assert lines[0] == "# seed=1"
    assert lines[1].startswith("t,rho_0,") and lines[1].endswith("rho_15")
    assert lines[3].split(",")[:2] == ["0.5", "2"]
