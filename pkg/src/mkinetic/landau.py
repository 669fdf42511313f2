"""Landau-Coulomb coefficient fields and the collision right-hand sides.

Coefficients are free-space convolutions in v, done per x point:

    a[f]   = 1/(4 pi |z|) * f,          grad a[f] = grad(1/(4 pi |z|)) * f,
    A[f]ij = P_ij(z) / (8 pi |z|) * f,  P(z) = I - z z^T / |z|^2.

All three derive from one radial potential psi(z) = |z| / (8 pi): A = D^2 psi,
a = tr A = Laplacian(psi), grad a = div A.  The potential is cut off smoothly
beyond the box diameter, psi_L(r) = r chi(r) / (8 pi), so every kernel has
compact support and its Fourier transform is available from one radial
integral.  The kernels are sampled by an exact trigonometric sum on a grid
four times larger per axis, restricted to the 2n padded cube and applied by
zero-padded FFT convolution.  Because every kernel is a derivative of the
same psi_L, tr A = a and div A = grad a hold to roundoff, and the kernels
are exact (no cell averaging) up to the band limit of the grid.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from ._fftw import convolver, real_fft
from .dyadic import smooth_step
from .spectral import Field, PhaseGrid, write_snapshot

log = logging.getLogger(__name__)

__all__ = [
    "ModelParams",
    "CoefficientSet",
    "LandauKernels",
    "landau_kernels",
    "compute_coefficients",
    "compute_a",
    "compute_A",
    "compute_grad_a",
    "divergence_A_oversampled",
    "coefficient_constants",
    "export_coefficients",
    "VelocityCalculus",
    "toy_rhs",
    "landau_rhs",
    "ToyOperator",
    "LandauOperator",
]

PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
A_KEYS = tuple(f"A{i}{j}" for i, j in PAIRS)
G_KEYS = ("g0", "g1", "g2")
SHELL_MASS_WARN = 1e-6


@dataclass(frozen=True)
class ModelParams:
    nu: float = 0.0
    beta: float = 0.0
    m: float = 4.0
    k0: float = 10.0
    c0: float = 0.01
    m0: float = 1.0

    def __post_init__(self) -> None:
        if self.nu < 0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if self.beta > 2:
            raise ValueError(f"beta must be <= 2, got {self.beta}")
        if not self.m > 3:
            raise ValueError(f"m must be > 3, got {self.m}")


@dataclass
class CoefficientSet:
    A: np.ndarray  # (3, 3, *field_shape), symmetric
    a: np.ndarray | None
    grad_a: np.ndarray  # (3, *field_shape)

    def trace(self) -> np.ndarray:
        return self.A[0, 0] + self.A[1, 1] + self.A[2, 2]

    def min_eigenvalue(self) -> float:
        mats = np.moveaxis(self.A.reshape(3, 3, -1), -1, 0)
        return float(np.min(np.linalg.eigvalsh(mats)))

    def max_eigenvalue(self) -> float:
        mats = np.moveaxis(self.A.reshape(3, 3, -1), -1, 0)
        return float(np.max(np.linalg.eigvalsh(mats)))


# -- kernels -----------------------------------------------------------------

def _psi_hat(kvals: np.ndarray, L1: float, L2: float, panels: int = 64, order: int = 32) -> np.ndarray:
    """Fourier transform of r chi(r) / (8 pi) at radial wavenumbers kvals.

    chi = 1 on [0, L1] and falls smoothly to 0 on [L1, L2].  The [0, L1] part
    is integrated in closed form, the window part by panel Gauss-Legendre.
    """
    g, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(L1, L2, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    r = (mid[:, None] + half[:, None] * g[None]).ravel()
    wr = (half[:, None] * w[None]).ravel()
    chi = 1.0 - smooth_step((r - L1) / (L2 - L1))
    wr2 = wr * r * r * chi

    k = np.asarray(kvals, dtype=float)
    out = np.empty_like(k)
    zero = k == 0
    out[zero] = 0.5 * (L1**4 / 4.0 + np.sum(wr2 * r))
    kk = k[~zero]
    kl = kk * L1
    i1 = np.empty_like(kk)
    small = kl < 0.5
    # int_0^L1 r^2 sin(k r) dr: closed form, series when k L1 is small
    ks, ls = kk[small], L1
    ser = np.zeros_like(ks)
    term_sign = 1.0
    fact = 1.0
    for j in range(12):
        if j > 0:
            fact *= (2 * j) * (2 * j + 1)
            term_sign = -term_sign
        ser += term_sign * ks ** (2 * j + 1) * ls ** (2 * j + 4) / (fact * (2 * j + 4))
    i1[small] = ser
    kb, lb = kk[~small], kl[~small]
    i1[~small] = -(L1**2) * np.cos(lb) / kb + 2 * L1 * np.sin(lb) / kb**2 + 2 * (np.cos(lb) - 1) / kb**3
    i2 = np.empty_like(kk)
    step = 2048
    for s in range(0, kk.size, step):
        i2[s : s + step] = np.sin(np.outer(kk[s : s + step], r)) @ wr2
    out[~zero] = (i1 + i2) / (2.0 * kk)
    return out


class LandauKernels:
    """Padded-grid kernel spectra for one velocity grid (n, l_v)."""

    def __init__(self, n: int, l_v: float, oversample: int = 4):
        self.n = n
        self.l_v = float(l_v)
        self.h = 2.0 * l_v / n
        self.M = oversample * n
        self.period = self.M * self.h
        self.L1 = 2.0 * math.sqrt(3.0) * l_v + self.h
        self.L2 = self.period - 2.0 * l_v - self.h
        if self.L2 <= self.L1:
            raise ValueError("oversampling too small for the kernel cutoff")
        half = self.M // 2
        m2 = np.arange(3 * half * half + 1)
        self._table = _psi_hat(2.0 * math.pi / self.period * np.sqrt(m2), self.L1, self.L2)
        mf = sfft.fftfreq(self.M, 1.0 / self.M).astype(np.int64)
        mr = np.arange(half + 1, dtype=np.int64)
        self._m = (mf[:, None, None], mf[None, :, None], mr[None, None, :])
        self._nyq = (mf == -half)[:, None, None], (mf == -half)[None, :, None], (mr == half)[None, None, :]
        self.spectra: dict[str, np.ndarray] = {}
        for key in ("a",) + A_KEYS + G_KEYS:
            self.spectra[key] = self._restricted_spectrum(key)

    def _k(self, i: int) -> np.ndarray:
        return 2.0 * math.pi / self.period * self._m[i]

    def symbol(self, key: str) -> np.ndarray:
        """Kernel symbol on the oversampled half-spectrum grid."""
        mm = self._m
        psi = self._table[mm[0] ** 2 + mm[1] ** 2 + mm[2] ** 2]
        k = [self._k(i) for i in range(3)]
        if key == "a":
            return -(k[0] ** 2 + k[1] ** 2 + k[2] ** 2) * psi
        if key.startswith("A"):
            i, j = int(key[1]), int(key[2])
            s = -k[i] * k[j] * psi
            if i != j:
                s = np.where(self._nyq[i] | self._nyq[j], 0.0, s)
            return s
        if key.startswith("g"):
            j = int(key[1])
            s = 1j * k[j] * self.symbol("a")
            return np.where(self._nyq[j], 0.0, s)
        raise KeyError(key)

    def _restricted_spectrum(self, key: str) -> np.ndarray:
        n, M, h = self.n, self.M, self.h
        kern = sfft.irfftn(self.symbol(key), s=(M, M, M)) / h**3
        idx = np.r_[0:n, M - n : M]
        k2 = kern[np.ix_(idx, idx, idx)]
        # offset -n*h never pairs two points of an n-grid; dropping it makes the kernel exactly even/odd
        k2[n, :, :] = 0.0
        k2[:, n, :] = 0.0
        k2[:, :, n] = 0.0
        return sfft.rfftn(k2) * (h**3 / (2 * n) ** 3)


@lru_cache(maxsize=4)
def landau_kernels(n: int, l_v: float) -> LandauKernels:
    log.debug("building Landau kernels n=%d l_v=%g", n, l_v)
    return LandauKernels(n, l_v)


def _blocks(values: np.ndarray, g: PhaseGrid) -> np.ndarray:
    n = g.n_v
    return values.reshape(-1, n, n, n)


def _check_shell(values: np.ndarray, g: PhaseGrid) -> float:
    total = float(np.sum(np.abs(values)))
    if total == 0.0:
        return 0.0
    b = _blocks(values, g)
    inner = np.abs(b[:, 1:-1, 1:-1, 1:-1]).sum()
    frac = (total - float(inner)) / total
    if frac > SHELL_MASS_WARN:
        warnings.warn(
            f"shell mass fraction {frac:.2e} exceeds {SHELL_MASS_WARN:g}; box truncation unreliable",
            RuntimeWarning,
            stacklevel=3,
        )
    return frac


def convolve_fields(values: np.ndarray, g: PhaseGrid, keys) -> dict[str, np.ndarray]:
    """Free-space convolution of every x-slice of f with the requested kernels."""
    kern = landau_kernels(g.n_v, g.l_v)
    conv = convolver(g.n_v)
    blocks = _blocks(values, g)
    out = {k: np.empty(blocks.shape) for k in keys}
    for ix in range(blocks.shape[0]):
        conv.load(blocks[ix])
        for k in keys:
            conv.apply(kern.spectra[k], out[k][ix])
    return {k: v.reshape(values.shape) for k, v in out.items()}


def _assemble(fields: dict[str, np.ndarray], shape) -> CoefficientSet:
    A = np.empty((3, 3) + shape)
    for i, j in PAIRS:
        A[i, j] = fields[f"A{i}{j}"]
        A[j, i] = A[i, j]
    grad = np.stack([fields[k] for k in G_KEYS])
    return CoefficientSet(A, fields.get("a"), grad)


def compute_coefficients(f: Field, with_a: bool = True) -> CoefficientSet:
    _check_shell(f.values, f.grid)
    keys = (("a",) if with_a else ()) + A_KEYS + G_KEYS
    return _assemble(convolve_fields(f.values, f.grid, keys), f.values.shape)


def compute_a(f: Field) -> np.ndarray:
    _check_shell(f.values, f.grid)
    return convolve_fields(f.values, f.grid, ("a",))["a"]


def compute_A(f: Field) -> np.ndarray:
    _check_shell(f.values, f.grid)
    fields = convolve_fields(f.values, f.grid, A_KEYS)
    A = np.empty((3, 3) + f.values.shape)
    for i, j in PAIRS:
        A[i, j] = A[j, i] = fields[f"A{i}{j}"]
    return A


def compute_grad_a(f: Field) -> np.ndarray:
    """grad a[f], convolved with the gradient kernel.

    A spectral gradient of a on the box would see the 1/|v| tail as a jump
    across the periodic boundary; differentiating the kernel avoids that.
    """
    _check_shell(f.values, f.grid)
    fields = convolve_fields(f.values, f.grid, G_KEYS)
    return np.stack([fields[k] for k in G_KEYS])


def divergence_A_oversampled(f: Field) -> np.ndarray:
    """div A computed independently: A on the oversampled periodic grid, then a spectral divergence.

    Returns the inner-box values, shape (3, *f.shape).  Costs roughly fifteen
    transforms of size (4 n)^3 per x point; intended for verification.
    """
    g = f.grid
    kern = landau_kernels(g.n_v, g.l_v)
    n, M = g.n_v, kern.M
    blocks = _blocks(f.values, g)
    out = np.empty((3,) + blocks.shape)
    k = [kern._k(i) for i in range(3)]
    nyq = kern._nyq
    for ix in range(blocks.shape[0]):
        F = sfft.rfftn(blocks[ix], s=(M, M, M))
        div = [np.zeros(kern.symbol("a").shape, dtype=complex) for _ in range(3)]
        for i, j in PAIRS:
            field = sfft.irfftn(kern.symbol(f"A{i}{j}") * F, s=(M, M, M))
            Fa = sfft.rfftn(field)
            div[j] += np.where(nyq[i], 0.0, 1j * k[i]) * Fa
            if i != j:
                div[i] += np.where(nyq[j], 0.0, 1j * k[j]) * Fa
        for j in range(3):
            out[j, ix] = sfft.irfftn(div[j], s=(M, M, M))[:n, :n, :n]
    return out.reshape((3,) + f.values.shape)


def coefficient_constants(f: Field, m: float) -> dict[str, float]:
    """Measured ratios behind the sup and L^6 coefficient bounds, worst case over x."""
    g = f.grid
    coeffs = compute_coefficients(f, with_a=True)
    w = g.weight(m)
    vals = _blocks(f.values, g)
    lam = np.linalg.eigvalsh(np.moveaxis(coeffs.A.reshape(3, 3, -1), -1, 0)).reshape(vals.shape + (3,))
    a = _blocks(coeffs.a, g)
    ga = np.sqrt(sum(_blocks(coeffs.grad_a[i], g) ** 2 for i in range(3)))
    dv3 = g.dv3
    out = {"A_over_a": 0.0, "c_A": 0.0, "c_grad_a": 0.0, "grad_a_L6_over_f_L2": 0.0}
    for ix in range(vals.shape[0]):
        fx = vals[ix]
        wf2 = math.sqrt(np.sum((w * fx) ** 2) * dv3)
        wf4 = (np.sum((w * np.abs(fx)) ** 4) * dv3) ** 0.25
        f2 = math.sqrt(np.sum(fx**2) * dv3)
        a_sup = float(np.max(np.abs(a[ix])))
        A_sup = float(np.max(np.abs(lam[ix])))
        g_sup = float(np.max(ga[ix]))
        g6 = float((np.sum(ga[ix] ** 6) * dv3) ** (1 / 6))
        if a_sup > 0:
            out["A_over_a"] = max(out["A_over_a"], A_sup / a_sup)
        if wf2 > 0:
            out["c_A"] = max(out["c_A"], a_sup / wf2)
        if wf4 > 0:
            out["c_grad_a"] = max(out["c_grad_a"], g_sup / wf4)
        if f2 > 0:
            out["grad_a_L6_over_f_L2"] = max(out["grad_a_L6_over_f_L2"], g6 / f2)
    return out


def export_coefficients(coeffs: CoefficientSet, g: PhaseGrid, directory, time: float = 0.0) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    items = [(f"A{i}{j}", coeffs.A[i, j]) for i, j in PAIRS]
    items += [(f"grad_a{j}", coeffs.grad_a[j]) for j in range(3)]
    if coeffs.a is not None:
        items.append(("a", coeffs.a))
    for name, arr in items:
        p = d / f"{name}.mkin"
        write_snapshot(p, Field(arr, g, time))
        paths.append(p)
    return paths


# -- right-hand sides --------------------------------------------------------

class VelocityCalculus:
    """Spectral first derivatives in v on the periodic box, Nyquist mode dropped.

    Second derivatives are products of first derivatives so that div(grad)
    equals the Laplacian exactly and every operator is in discrete divergence
    form.
    """

    def __init__(self, g: PhaseGrid):
        self.g = g
        n = g.n_v
        xi = g.xi_nodes().copy()
        xi[n // 2] = 0.0
        xr = sfft.rfftfreq(n, g.dv) * 2 * math.pi
        xr[-1] = 0.0
        nd = g.dim_x + 3
        shp = lambda ax: [1 if i != ax else -1 for i in range(nd)]
        self.xi = [xi.reshape(shp(g.dim_x)), xi.reshape(shp(g.dim_x + 1)), xr.reshape(shp(g.dim_x + 2))]
        self.axes = g.v_axes
        self.vshape = (n, n, n)
        self.lap = -(self.xi[0] ** 2 + self.xi[1] ** 2 + self.xi[2] ** 2)

    def _plan(self, shape):
        return real_fft(shape, self.axes)

    def fwd(self, values: np.ndarray) -> np.ndarray:
        return self._plan(values.shape).forward(values)

    def inv(self, spec: np.ndarray) -> np.ndarray:
        shape = spec.shape[: self.axes[0]] + self.vshape
        return self._plan(shape).backward(spec)

    def grad(self, values: np.ndarray) -> list[np.ndarray]:
        F = self.fwd(values)
        return [self.inv(1j * self.xi[i] * F) for i in range(3)]

    def div(self, comps) -> np.ndarray:
        acc = None
        for i in range(3):
            term = 1j * self.xi[i] * self.fwd(comps[i])
            acc = term if acc is None else acc + term
        return self.inv(acc)

    def laplacian(self, values: np.ndarray) -> np.ndarray:
        return self.inv(self.lap * self.fwd(values))


class ToyOperator:
    """div_v(rho(x) <v>^beta grad_v f) with rho supplied by the caller."""

    def __init__(self, g: PhaseGrid, beta: float):
        self.g = g
        self.beta = beta
        self.calc = VelocityCalculus(g)
        v = g.v_mesh()
        self.weight = (1.0 + v[0] ** 2 + v[1] ** 2 + v[2] ** 2) ** (0.5 * beta)

    def coefficient(self, rho: np.ndarray) -> np.ndarray:
        return rho.reshape(self.g.x_shape + (1, 1, 1)) * self.weight

    def __call__(self, values: np.ndarray, rho: np.ndarray) -> np.ndarray:
        if self.beta == 0:
            # D.(rho D f) = rho (D.D) f exactly when the coefficient is v-independent
            return rho.reshape(self.g.x_shape + (1, 1, 1)) * self.calc.laplacian(values)
        c = self.coefficient(rho)
        grads = self.calc.grad(values)
        return self.calc.div([c * gi for gi in grads])

    def max_coefficient(self, rho: np.ndarray) -> float:
        return float(np.max(np.abs(rho))) * float(np.max(self.weight))


class LandauOperator:
    """Q(f) = sum_ij D_i D_j (A_ij f) - 2 sum_i D_i (f d_i a) + nu Lap f.

    This is div(A grad f - f grad a) rewritten with div A = grad a.  Mass is
    conserved exactly by the divergence form.  Momentum and energy hold only to
    spectral accuracy on a truncated box (the linear weight v is not periodic),
    so with ``conservative`` the result is projected per x point onto
    {sum Q = 0, sum v Q = 0, sum |v|^2 Q = 6 nu rho}, using corrections of the
    form f (c0 + c.v + c4 |v|^2).  The size of the correction is kept in
    ``last_defect``.
    """

    def __init__(self, g: PhaseGrid, nu: float, conservative: bool = True):
        self.g = g
        self.nu = nu
        self.conservative = conservative
        self.calc = VelocityCalculus(g)
        self.last_coefficients: dict[str, np.ndarray] | None = None
        self.last_defect = 0.0
        v1, v2, v3 = g.v_mesh3()
        ones = np.ones((g.n_v,) * 3)
        self._basis = np.stack([ones, v1 * ones, v2 * ones, v3 * ones, v1**2 + v2**2 + v3**2])
        flat = self._basis.reshape(5, -1)
        self._pairs = (flat[:, None, :] * flat[None, :, :]).reshape(25, -1)

    def coefficients(self, values: np.ndarray) -> dict[str, np.ndarray]:
        return convolve_fields(values, self.g, A_KEYS + G_KEYS)

    def __call__(self, values: np.ndarray, coeffs: dict[str, np.ndarray] | None = None) -> np.ndarray:
        if coeffs is None:
            coeffs = self.coefficients(values)
        self.last_coefficients = coeffs
        c = self.calc
        xi = c.xi
        acc = c.fwd(values)
        acc *= c.lap * self.nu
        for i, j in PAIRS:
            term = c.fwd(coeffs[f"A{i}{j}"] * values)
            term *= -xi[i] * xi[j] * (1.0 if i == j else 2.0)
            acc += term
        for i in range(3):
            term = c.fwd(values * coeffs[G_KEYS[i]])
            term *= -2j * xi[i]
            acc += term
        Q = c.inv(acc)
        if self.conservative:
            Q = self._project(values, Q)
        return Q

    def _project(self, values: np.ndarray, Q: np.ndarray) -> np.ndarray:
        n = self.g.n_v
        phi = self._basis.reshape(5, -1)
        fb = values.reshape(-1, n**3)
        qb = Q.reshape(-1, n**3)
        w = np.abs(fb)
        gram = (w @ self._pairs.T).reshape(-1, 5, 5)
        mom = qb @ phi.T
        target = np.zeros_like(mom)
        target[:, 4] = 6.0 * self.nu * fb.sum(axis=1)
        resid = mom - target
        scale = np.abs(mom).max(initial=0.0) + np.abs(target).max(initial=0.0)
        self.last_defect = float(np.abs(resid).max(initial=0.0) / scale) if scale > 0 else 0.0
        coef = np.zeros_like(resid)
        ok = gram[:, 0, 0] > 0
        if np.any(ok):
            coef[ok] = np.linalg.solve(gram[ok], resid[ok][..., None])[..., 0]
        out = qb - w * (coef @ phi)
        return out.reshape(Q.shape)

    def max_coefficient(self, coeffs: dict[str, np.ndarray]) -> float:
        """Gershgorin bound on the largest eigenvalue of A, plus nu."""
        rows = []
        for i in range(3):
            r = np.abs(coeffs[f"A{i}{i}"])
            for j in range(3):
                if j != i:
                    a, b = min(i, j), max(i, j)
                    r = r + np.abs(coeffs[f"A{a}{b}"])
            rows.append(float(np.max(r)))
        return max(rows) + self.nu

    def max_drift(self, coeffs: dict[str, np.ndarray]) -> float:
        return 2.0 * float(np.max(np.sqrt(sum(coeffs[k] ** 2 for k in G_KEYS))))


def toy_rhs(f: Field, params: ModelParams, rho: np.ndarray | None = None) -> Field:
    from .spectral import density

    op = ToyOperator(f.grid, params.beta)
    r = density(f) if rho is None else rho
    return f.with_values(op(f.values, r))


def landau_rhs(f: Field, params: ModelParams, conservative: bool = True) -> Field:
    op = LandauOperator(f.grid, params.nu, conservative)
    _check_shell(f.values, f.grid)
    return f.with_values(op(f.values))
