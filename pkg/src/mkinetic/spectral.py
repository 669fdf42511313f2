"""Phase-space grid, transforms, exact free streaming, mollifiers and moments.

Phase space is T^d x [-l_v, l_v)^3 with d = dim_x in {1, 3}; the velocity box
is a periodic surrogate for R^3.  Array layout is (x axes..., v1, v2, v3).

Transforms use the numpy sign convention (exp(-i k.z) forward).  Modes are
normalized so that sum |F|^2 equals the rectangle-rule L2 norm of the field:
F = fftn(f, norm="ortho") * sqrt(cell volume).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.fft as sfft


__all__ = [
    "PhaseGrid",
    "Field",
    "SpectralField",
    "Totals",
    "forward",
    "inverse",
    "apply_multiplier",
    "is_aligned",
    "transport_shear",
    "mollify",
    "mollify_density",
    "density",
    "moments",
    "totals",
    "weighted_sup_norm",
    "japanese",
    "write_snapshot",
    "read_snapshot",
    "write_density_csv",
    "SNAPSHOT_MAGIC",
]

SNAPSHOT_MAGIC = b"MKIN1"
_HEADER = struct.Struct("<5s3I2d")


def _pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def japanese(z):
    """<z> = sqrt(1 + |z|^2) along the last axis."""
    z = np.asarray(z, dtype=float)
    return np.sqrt(1.0 + np.sum(z * z, axis=-1))


@dataclass(frozen=True)
class PhaseGrid:
    dim_x: int
    n_x: int
    n_v: int
    l_v: float

    def __post_init__(self) -> None:
        if self.dim_x not in (1, 3):
            raise ValueError(f"dim_x must be 1 or 3, got {self.dim_x}")
        if not (_pow2(self.n_x) and _pow2(self.n_v)):
            raise ValueError(f"n_x and n_v must be powers of two, got {self.n_x}, {self.n_v}")
        if not self.l_v > 0:
            raise ValueError(f"l_v must be positive, got {self.l_v}")

    # geometry
    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_x,) * self.dim_x + (self.n_v,) * 3

    @property
    def x_shape(self) -> tuple[int, ...]:
        return (self.n_x,) * self.dim_x

    @property
    def x_axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim_x))

    @property
    def v_axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim_x, self.dim_x + 3))

    @property
    def dx(self) -> float:
        return 2.0 * math.pi / self.n_x

    @property
    def dv(self) -> float:
        return 2.0 * self.l_v / self.n_v

    @property
    def dxi(self) -> float:
        return math.pi / self.l_v

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim_x * self.dv**3

    @property
    def dv3(self) -> float:
        return self.dv**3

    @property
    def dxd(self) -> float:
        return self.dx**self.dim_x

    def x_nodes(self) -> np.ndarray:
        return self.dx * np.arange(self.n_x)

    def v_nodes(self) -> np.ndarray:
        return -self.l_v + self.dv * np.arange(self.n_v)

    def _bshape(self, axis: int) -> list[int]:
        s = [1] * (self.dim_x + 3)
        s[axis] = -1
        return s

    def x_mesh(self) -> list[np.ndarray]:
        """Broadcastable spatial coordinates, one per x axis."""
        return [self.x_nodes().reshape(self._bshape(a)) for a in self.x_axes]

    def v_mesh(self) -> list[np.ndarray]:
        """Broadcastable velocity components (v1, v2, v3)."""
        return [self.v_nodes().reshape(self._bshape(a)) for a in self.v_axes]

    def v_mesh3(self) -> list[np.ndarray]:
        """Velocity components on the bare (n_v, n_v, n_v) grid."""
        v = self.v_nodes()
        return [v.reshape([-1 if i == a else 1 for i in range(3)]) for a in range(3)]

    def speed(self) -> np.ndarray:
        v1, v2, v3 = self.v_mesh3()
        return np.sqrt(v1**2 + v2**2 + v3**2)

    def weight(self, k: float) -> np.ndarray:
        """<v>^k on the (n_v,)^3 velocity grid."""
        v1, v2, v3 = self.v_mesh3()
        return (1.0 + v1**2 + v2**2 + v3**2) ** (0.5 * k)

    def eta_nodes(self) -> np.ndarray:
        return sfft.fftfreq(self.n_x, 1.0 / self.n_x)

    def xi_nodes(self) -> np.ndarray:
        return 2.0 * math.pi * sfft.fftfreq(self.n_v, self.dv)

    def eta_mesh(self) -> list[np.ndarray]:
        """Integer spatial wavenumbers as three broadcastable components (zero beyond dim_x)."""
        out = []
        for i in range(3):
            if i < self.dim_x:
                out.append(self.eta_nodes().reshape(self._bshape(i)))
            else:
                out.append(np.zeros([1] * (self.dim_x + 3)))
        return out

    def xi_mesh(self) -> list[np.ndarray]:
        return [self.xi_nodes().reshape(self._bshape(a)) for a in self.v_axes]

    def describe(self) -> dict:
        return {"dim_x": self.dim_x, "n_x": self.n_x, "n_v": self.n_v, "l_v": self.l_v}


@dataclass
class Field:
    values: np.ndarray
    grid: PhaseGrid
    time: float = 0.0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")

    def copy(self) -> "Field":
        return Field(self.values.copy(), self.grid, self.time)

    def with_values(self, values: np.ndarray, time: float | None = None) -> "Field":
        return Field(values, self.grid, self.time if time is None else time)

    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.grid.cell_volume))

    def lp(self, p: float) -> float:
        if math.isinf(p):
            return float(np.max(np.abs(self.values)))
        return float((np.sum(np.abs(self.values) ** p) * self.grid.cell_volume) ** (1.0 / p))


@dataclass
class SpectralField:
    modes: np.ndarray
    grid: PhaseGrid
    time: float = 0.0

    def __post_init__(self) -> None:
        if self.modes.shape != self.grid.shape:
            raise ValueError(f"mode array shape {self.modes.shape} does not match grid {self.grid.shape}")

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.modes) ** 2)))


def forward(f: Field) -> SpectralField:
    modes = sfft.fftn(f.values, norm="ortho") * math.sqrt(f.grid.cell_volume)
    return SpectralField(modes, f.grid, f.time)


def inverse(F: SpectralField) -> Field:
    vals = sfft.ifftn(F.modes / math.sqrt(F.grid.cell_volume), norm="ortho")
    return Field(vals.real, F.grid, F.time)


def apply_multiplier(F: SpectralField, symbol: Callable[[list, list], np.ndarray]) -> SpectralField:
    """Pointwise product with symbol(eta, xi); eta and xi are lists of three broadcastable arrays."""
    m = symbol(F.grid.eta_mesh(), F.grid.xi_mesh())
    return SpectralField(F.modes * m, F.grid, F.time)


def is_aligned(dt: float, grid: PhaseGrid, rtol: float = 1e-9) -> bool:
    k = dt / grid.dxi
    return abs(k - round(k)) <= rtol * max(1.0, abs(k))


def transport_shear(f: Field, dt: float) -> Field:
    """Exact free streaming f(x, v) <- f(x - dt v, v) for grid-aligned dt.

    In mode space this is xi -> xi + dt eta, an integer index shift when dt is
    a multiple of dxi.  It is applied as a phase in (eta, v) so the Nyquist x
    mode, which has no conjugate partner, is handled by taking the real part.
    """
    g = f.grid
    if not is_aligned(dt, g):
        raise ValueError(f"dt={dt} is not an integer multiple of dxi={g.dxi}")
    if dt == 0:
        return f.copy()
    return f.with_values(shear_values(f.values, g, dt), f.time + dt)


def shear_values(values: np.ndarray, g: PhaseGrid, dt: float) -> np.ndarray:
    fx = sfft.fftn(values, axes=g.x_axes)
    eta = g.eta_mesh()
    v = g.v_mesh()
    phase = sum(eta[i] * v[i] for i in range(g.dim_x))
    fx *= np.exp(-1j * dt * phase)
    return sfft.ifftn(fx, axes=g.x_axes).real


def _bump_kernel(g: PhaseGrid, a: float, include_x: bool, include_v: bool) -> np.ndarray:
    """Sampled C-infinity bump of radius a in (x, v), unit discrete mass."""
    r2 = np.zeros([1] * (g.dim_x + 3))
    if include_x:
        ox = g.dx * sfft.fftfreq(g.n_x, 1.0 / g.n_x)
        for ax in g.x_axes:
            r2 = r2 + (ox.reshape(g._bshape(ax))) ** 2
    if include_v:
        ov = g.dv * sfft.fftfreq(g.n_v, 1.0 / g.n_v)
        for ax in g.v_axes:
            r2 = r2 + (ov.reshape(g._bshape(ax))) ** 2
    s = np.sqrt(r2) / a
    # exp(-1/(1 - s^2)) written through the smooth step for a clean zero at s = 1
    ker = np.where(s < 1, np.exp(-1.0 / np.maximum(1.0 - s * s, 1e-300)), 0.0)
    ker = np.broadcast_to(ker, g.shape).copy()
    return ker / ker.sum()


def _fejer_multiplier(n: int, a: float, freqs: np.ndarray, unit: float) -> np.ndarray:
    order = min(int(math.floor(1.0 / a)), n // 2 - 1) if a > 0 else n // 2 - 1
    order = max(order, 0)
    return np.clip(1.0 - np.abs(freqs / unit) / (order + 1), 0.0, None)


def mollify(f: Field, a: float, kernel: str = "bump", in_v: bool = True) -> Field:
    """Convolution with a unit-mass kernel of radius a in (x, v).

    kernel="bump": sampled compactly supported bump exp(-1/(1 - |y/a|^2)),
    nonnegative, radius a in the joint (x, v) metric.
    kernel="fejer": tensor-product Fejer kernel of order floor(1/a) per axis
    (capped below Nyquist), a positive summability kernel; its output is
    nonnegative for nonnegative input up to roundoff.
    """
    if not a > 0:
        raise ValueError("mollifier radius must be positive")
    g = f.grid
    axes = g.x_axes + (g.v_axes if in_v else ())
    if kernel == "bump":
        ker = _bump_kernel(g, a, True, in_v)
        out = sfft.irfftn(sfft.rfftn(f.values) * sfft.rfftn(ker), s=g.shape)
        return f.with_values(out)
    if kernel == "fejer":
        F = sfft.fftn(f.values, axes=axes)
        for ax in g.x_axes:
            F *= _fejer_multiplier(g.n_x, a, g.eta_nodes(), 1.0).reshape(g._bshape(ax))
        if in_v:
            for ax in g.v_axes:
                F *= _fejer_multiplier(g.n_v, a, g.xi_nodes(), g.dxi).reshape(g._bshape(ax))
        return f.with_values(sfft.ifftn(F, axes=axes).real)
    raise ValueError(f"unknown mollifier kernel {kernel!r}")


def mollify_density(rho: np.ndarray, g: PhaseGrid, a: float, kernel: str = "fejer") -> np.ndarray:
    """Spatial mollification of a density rho(x)."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape != g.x_shape:
        raise ValueError("density shape does not match the spatial grid")
    if kernel == "fejer":
        F = sfft.fftn(rho)
        for ax in range(g.dim_x):
            shp = [1] * g.dim_x
            shp[ax] = -1
            F *= _fejer_multiplier(g.n_x, a, g.eta_nodes(), 1.0).reshape(shp)
        return sfft.ifftn(F).real
    if kernel == "bump":
        ox = g.dx * sfft.fftfreq(g.n_x, 1.0 / g.n_x)
        r2 = sum(ox.reshape([-1 if i == ax else 1 for i in range(g.dim_x)]) ** 2 for ax in range(g.dim_x))
        s = np.sqrt(r2) / a
        ker = np.where(s < 1, np.exp(-1.0 / np.maximum(1.0 - s * s, 1e-300)), 0.0)
        ker = np.broadcast_to(ker, g.x_shape)
        ker = ker / ker.sum()
        return sfft.irfftn(sfft.rfftn(rho) * sfft.rfftn(ker), s=g.x_shape)
    raise ValueError(f"unknown mollifier kernel {kernel!r}")


@dataclass
class Totals:
    mass: float
    momentum: np.ndarray
    energy: float

    def as_row(self) -> list[float]:
        return [self.mass, *map(float, self.momentum), self.energy]


def density(f: Field) -> np.ndarray:
    """rho(x) = int f dv by the rectangle rule."""
    return f.values.sum(axis=f.grid.v_axes) * f.grid.dv3


def moments(f: Field) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spatial profiles (rho, momentum density (3, ...), energy density) with energy = int |v|^2 f dv."""
    return values_moments(f.values, f.grid)


def values_moments(values: np.ndarray, g: PhaseGrid):
    va = g.v_axes
    rho = values.sum(axis=va) * g.dv3
    v = g.v_mesh()
    mom = np.stack([(values * v[i]).sum(axis=va) * g.dv3 for i in range(3)])
    en = (values * (v[0] ** 2 + v[1] ** 2 + v[2] ** 2)).sum(axis=va) * g.dv3
    return rho, mom, en


def totals(f: Field) -> Totals:
    rho, mom, en = moments(f)
    dxd = f.grid.dxd
    return Totals(float(rho.sum() * dxd), mom.reshape(3, -1).sum(axis=1) * dxd, float(en.sum() * dxd))


def weighted_sup_norm(f: Field, k: float) -> float:
    w = f.grid.weight(k)
    return float(np.max(np.abs(f.values) * w))


def shell_ratio(values: np.ndarray, g: PhaseGrid, k: float, width: int = 1) -> float:
    """Max of <v>^k |f| on the outer `width` cells of the v box, relative to its global max."""
    w = np.abs(values) * g.weight(k)
    top = float(np.max(w))
    if top == 0.0:
        return 0.0
    n = g.n_v
    idx = np.zeros((n,) * 3, dtype=bool)
    idx[:width], idx[-width:] = True, True
    idx[:, :width], idx[:, -width:] = True, True
    idx[:, :, :width], idx[:, :, -width:] = True, True
    shell = w[(Ellipsis,) + np.nonzero(idx)]
    return float(np.max(shell)) / top


# -- files -----------------------------------------------------------------

def write_snapshot(path, f: Field) -> None:
    g = f.grid
    header = _HEADER.pack(SNAPSHOT_MAGIC, g.dim_x, g.n_x, g.n_v, float(g.l_v), float(f.time))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes(order="C"))


def read_snapshot(path) -> Field:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, dim_x, n_x, n_v, l_v, t = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    g = PhaseGrid(dim_x, n_x, n_v, l_v)
    body = data[_HEADER.size :]
    expect = 8 * int(np.prod(g.shape))
    if len(body) != expect:
        raise ValueError(f"{path}: expected {expect} data bytes, found {len(body)}")
    vals = np.frombuffer(body, dtype="<f8").reshape(g.shape).astype(float)
    return Field(vals, g, t)


def write_density_csv(path, times, rhos, g: PhaseGrid, header_lines=()) -> None:
    """rho(t, x) as rows t, x_0, ... (dim_x = 1) or flattened x (dim_x = 3)."""
    rhos = [np.asarray(r).ravel() for r in rhos]
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("t," + ",".join(f"rho_{i}" for i in range(rhos[0].size)) + "\n")
        for t, r in zip(times, rhos):
            fh.write(f"{t:.17g}," + ",".join(f"{x:.17g}" for x in r) + "\n")
