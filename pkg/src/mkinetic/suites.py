"""Property suites behind `mkinetic verify` and the acceptance tests.

Each suite returns a list of CheckResult rows (name, measured value, bound,
status).  Random samples come from an explicit numpy Generator so a seed
reproduces the table exactly.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from . import harness, landau, msymbol
from .dyadic import DyadicPartition, verify_derivative_decay, verify_partition
from .spectral import Field, PhaseGrid, inverse, forward, transport_shear, values_moments

__all__ = [
    "CheckResult",
    "symbol_suite",
    "dyadic_suite",
    "spectral_suite",
    "landau_suite",
    "commutator_suite",
    "random_phase_points",
    "random_nonnegative_field",
    "fd_laplacian_residual",
]


@dataclass
class CheckResult:
    name: str
    measured: float
    bound: float
    status: str  # pass | fail | skipped
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status != "fail"

    def row(self) -> list:
        return [self.name, f"{self.measured:.6e}", f"{self.bound:.6e}", self.status, self.note]


def _check(name: str, measured: float, bound: float, ok: bool, note: str = "") -> CheckResult:
    return CheckResult(name, float(measured), float(bound), "pass" if ok else "fail", note)


def random_phase_points(rng: np.random.Generator, n: int, xi_scale: float = 5.0, eta_max: int = 8, T_max: float = 3.0):
    t = rng.uniform(0.0, T_max, n)
    T = t + rng.uniform(0.0, T_max, n)
    xi = rng.normal(size=(n, 3)) * xi_scale * rng.uniform(0.0, 1.0, (n, 1))
    eta = rng.integers(-eta_max, eta_max + 1, size=(n, 3)).astype(float)
    return msymbol.PhasePoint(t, T, xi, eta)


# -- symbol -----------------------------------------------------------------------

def symbol_suite(rng: np.random.Generator, sym: msymbol.SymbolParams, n_phase: int = 10_000,
                 n_bound: int = 1000, n_deriv: int = 500) -> list[CheckResult]:
    out = []
    t0 = time.perf_counter()
    p = random_phase_points(rng, n_phase)
    closed = msymbol.phase_integral(p.t, p.T, p.xi, p.eta)
    quad = np.array([msymbol.phase_integral_quad(p.t[i], p.T[i], p.xi[i], p.eta[i]) for i in range(n_phase)])
    nz = quad > 0
    rel = float(np.max(np.abs(closed[nz] - quad[nz]) / quad[nz])) if nz.any() else 0.0
    out.append(_check("phase_integral_vs_quadrature", rel, 1e-10, rel < 1e-10, f"{n_phase} points"))

    q = random_phase_points(rng, 200)
    t_in = np.maximum(q.t, 0.05)
    T_in = t_in + np.maximum(q.T - q.t, 0.05)
    slope, _, _ = msymbol.commutator_fd_slope(sym, t_in, T_in, q.xi, q.eta)
    out.append(_check("commutator_fd_slope", slope, 1.9, slope >= 1.9, "central difference, 200 points"))

    if sym.canonical:
        worst = 0.0
        b = random_phase_points(rng, n_bound)
        for i in range(n_bound):
            T0 = b.t[i] + max(b.T[i] - b.t[i], 1e-3)
            chk = msymbol.check_time_integral_bound(sym, b.xi[i], b.eta[i], b.t[i], T0)
            worst = max(worst, chk.lhs / chk.rhs)
        out.append(_check("int_xi_M2_bound", worst, 1.0, worst <= 1.0, f"max lhs/(2/(eps delta)) over {n_bound}"))
    else:
        out.append(CheckResult("int_xi_M2_bound", float("nan"), sym.dissipation_bound(), "skipped",
                               f"exponent_p={sym.p} differs from 1/2+epsilon"))

    d = random_phase_points(rng, n_deriv)
    rep = msymbol.check_derivative_bounds(sym, d)
    for key in ("xi_order1", "xi_order2", "eta_order1", "eta_order2"):
        val = getattr(rep, key)
        out.append(_check(f"derivative_constant_{key}", val, float("inf"), math.isfinite(val),
                          "measured constant; no fixed bound"))
    out.append(_check("symbol_suite_runtime_s", time.perf_counter() - t0, 60.0, time.perf_counter() - t0 < 60.0))
    return out


# -- dyadic -----------------------------------------------------------------------

def dyadic_suite(rng: np.random.Generator, n_samples: int = 10_000, rings: int = 8) -> list[CheckResult]:
    t0 = time.perf_counter()
    part = DyadicPartition(rings + 1)
    v = rng.normal(size=(n_samples, 3))
    v *= (rng.uniform(0.0, 1.0, (n_samples, 1)) * part.r_max) / np.linalg.norm(v, axis=1, keepdims=True)
    rep = verify_partition(part, v)
    out = [
        _check("partition_sum", rep.max_sum_error, 1e-12, rep.max_sum_error < 1e-12),
        _check("partition_sum_squares", rep.min_sum_squares, 1.0 / 3.0 - 1e-12, rep.min_sum_squares >= 1.0 / 3.0 - 1e-12),
        _check("partition_support", rep.support_violations, 0, rep.support_violations == 0),
    ]
    dec = verify_derivative_decay(part, range(1, rings + 1))
    ratios = dec.halving_ratios()
    lo, hi = float(ratios.min()), float(ratios.max())
    out.append(_check("halving_ratio_min", lo, 0.4, lo >= 0.4, "rings 1..8"))
    out.append(_check("halving_ratio_max", hi, 0.6, hi <= 0.6, "rings 1..8"))
    out.append(_check("weighted_gradient_sum", dec.weighted_sum_sup, float("inf"), math.isfinite(dec.weighted_sum_sup),
                      "sup <v> sum |grad theta_k|"))
    out.append(_check("dyadic_suite_runtime_s", time.perf_counter() - t0, 60.0, time.perf_counter() - t0 < 60.0))
    return out


# -- spectral -----------------------------------------------------------------------

def spectral_suite(rng: np.random.Generator) -> list[CheckResult]:
    g = PhaseGrid(1, 16, 16, 8.0)
    f = Field(rng.standard_normal(g.shape), g)
    rt = float(np.max(np.abs(inverse(forward(f)).values - f.values)))
    out = [_check("fft_roundtrip", rt, 1e-12, rt < 1e-12)]
    sh = transport_shear(f, 3 * g.dxi)
    l2 = abs(sh.l2() - f.l2()) / f.l2()
    out.append(_check("transport_l2", l2, 1e-12, l2 < 1e-12))
    g8 = PhaseGrid(1, 4, 32, 8.0)
    v = g8.v_mesh()
    gauss = np.exp(-(v[0] ** 2 + v[1] ** 2 + v[2] ** 2) / 2) / (2 * math.pi) ** 1.5
    rho, _, _ = values_moments(np.broadcast_to(gauss, g8.shape), g8)
    err = float(np.max(np.abs(rho - 1.0)))
    out.append(_check("gaussian_density", err, 1e-8, err < 1e-8))
    return out


# -- landau -----------------------------------------------------------------------

def random_nonnegative_field(rng: np.random.Generator, n: int, l_v: float, kind: str | None = None) -> np.ndarray:
    """Nonnegative field on one velocity block, supported well inside the box.

    kind="blobs" is a random mixture of Gaussian blobs, kind="noise" is
    masked uniform noise; None picks one at random.
    """
    g = PhaseGrid(1, 1, n, l_v)
    v = g.v_mesh3()
    if kind is None:
        kind = "blobs" if rng.uniform() < 0.5 else "noise"
    if kind == "blobs":
        out = np.zeros((n, n, n))
        for _ in range(int(rng.integers(1, 5))):
            c = rng.uniform(-0.3 * l_v, 0.3 * l_v, 3)
            w = rng.uniform(0.6, 0.15 * l_v)
            out += rng.uniform(0.2, 1.0) * np.exp(-sum((v[i] - c[i]) ** 2 for i in range(3)) / (2 * w * w))
        return out
    if kind != "noise":
        raise ValueError(f"unknown field kind {kind!r}")
    r = np.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)
    return rng.uniform(0.0, 1.0, (n, n, n)) * (r < 0.5 * l_v)


def fd_laplacian_residual(a: np.ndarray, f: np.ndarray, h: float, margin: int = 4) -> float:
    """max |-Lap_h a - f| / max |f| on the interior, 8th-order central differences."""
    c = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560]) / h**2
    n = a.shape[0]
    inner = slice(margin, n - margin)
    lap = np.zeros((n - 2 * margin,) * 3)
    for ax in range(3):
        for k, ck in zip(range(-4, 5), c):
            idx = [inner, inner, inner]
            idx[ax] = slice(margin + k, n - margin + k)
            lap += ck * a[tuple(idx)]
    res = np.abs(-lap - f[inner, inner, inner])
    return float(res.max() / np.abs(f).max())


def landau_suite(rng: np.random.Generator, n_v: int = 64, l_v: float = 8.0, n_fields: int = 50,
                 with_divergence: bool = True) -> list[CheckResult]:
    t0 = time.perf_counter()
    g = PhaseGrid(1, 1, n_v, l_v)
    v = g.v_mesh()
    gauss = np.exp(-(v[0] ** 2 + v[1] ** 2 + v[2] ** 2) / 2) / (2 * math.pi) ** 1.5
    f = Field(np.broadcast_to(gauss, g.shape).copy(), g)
    c = landau.compute_coefficients(f)
    out = []

    # value at |v| = 1 on the first axis
    nodes = g.v_nodes()
    i1 = int(np.argmin(np.abs(nodes - 1.0)))
    i0 = int(np.argmin(np.abs(nodes)))
    if abs(nodes[i1] - 1.0) < 1e-12:
        a1 = float(c.a[0, i1, i0, i0])
        ref = erf(1 / math.sqrt(2)) / (4 * math.pi)
        out.append(_check("gaussian_potential_at_1", a1, ref, abs(a1 / ref - 1) < 5e-4, f"reference {ref:.10f}"))
    lap = fd_laplacian_residual(c.a[0], f.values[0], g.dv)
    out.append(_check("poisson_residual", lap, 1e-3, lap < 1e-3, "8th-order FD, 4-cell margin"))

    worst_tr = 0.0
    worst_sym = 0.0
    min_eig_rel = math.inf
    worst_l6 = 0.0
    fields = [random_nonnegative_field(rng, n_v, l_v) for _ in range(n_fields)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k, vals in enumerate(fields):
            fk = Field(vals[None], g)
            ck = landau.compute_coefficients(fk)
            scale = float(np.abs(ck.a).max())
            worst_tr = max(worst_tr, float(np.abs(ck.trace() - ck.a).max()) / scale)
            worst_sym = max(worst_sym, float(np.abs(ck.A - np.swapaxes(ck.A, 0, 1)).max()) / scale)
            min_eig_rel = min(min_eig_rel, ck.min_eigenvalue() / scale)
            ga = np.sqrt(sum(ck.grad_a[i] ** 2 for i in range(3)))
            l6 = float((np.sum(ga**6) * g.dv3) ** (1 / 6))
            l2 = float(math.sqrt(np.sum(vals**2) * g.dv3))
            worst_l6 = max(worst_l6, l6 / l2)
    out.append(_check("trace_A_equals_a", worst_tr, 1e-10, worst_tr < 1e-10, f"{n_fields} random fields"))
    out.append(_check("A_symmetric", worst_sym, 1e-14, worst_sym <= 1e-14))
    out.append(_check("A_psd_min_eig_rel", min_eig_rel, -1e-3, min_eig_rel >= -1e-3,
                      "smallest eigenvalue over max a; band-limited kernel allows slight negativity"))
    out.append(_check("grad_a_L6_over_f_L2", worst_l6, 1.0, worst_l6 <= 1.0, f"{n_fields} random fields"))

    if with_divergence:
        # the identity is checked on smooth fields; white noise carries Nyquist content
        # on which the two discrete routes legitimately differ, so it is only reported
        def div_gap(vals):
            fd = Field(vals[None], g)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                fast = landau.compute_grad_a(fd)
            div = landau.divergence_A_oversampled(fd)
            return float(np.linalg.norm(div - fast) / np.linalg.norm(fast))

        smooth = max(div_gap(random_nonnegative_field(rng, n_v, l_v, "blobs")) for _ in range(3))
        out.append(_check("div_A_equals_grad_a", smooth, 1e-8, smooth < 1e-8,
                          "relative L2 over 3 random smooth fields, oversampled spectral divergence"))
        rough = div_gap(random_nonnegative_field(rng, n_v, l_v, "noise"))
        out.append(_check("div_A_equals_grad_a_rough", rough, math.inf, math.isfinite(rough),
                          "masked white noise; discretization-limited, reported only"))
    elapsed = time.perf_counter() - t0
    out.append(_check("landau_suite_runtime_s", elapsed, 300.0, elapsed < 300.0))
    return out


# -- commutator -----------------------------------------------------------------------

def commutator_field(rng: np.random.Generator, g: PhaseGrid, xi0: float) -> Field:
    """Random x profile, band-limited to |eta| <= n_x / 4, times a v carrier at |xi| ~ xi0."""
    import scipy.fft as sfft

    prof = rng.standard_normal(g.x_shape)
    F = sfft.fftn(prof)
    eta = np.abs(sfft.fftfreq(g.n_x, 1.0 / g.n_x))
    mask = np.ones(g.x_shape, dtype=bool)
    for ax in range(g.dim_x):
        mask &= (eta <= g.n_x // 4).reshape([-1 if i == ax else 1 for i in range(g.dim_x)])
    prof = sfft.ifftn(F * mask).real
    v = g.v_mesh()
    carrier = np.cos(xi0 * v[0]) * np.exp(-(v[0] ** 2 + v[1] ** 2 + v[2] ** 2) / 4)
    vals = prof.reshape(g.x_shape + (1, 1, 1)) * carrier
    return Field(np.broadcast_to(vals, g.shape).copy(), g)


def commutator_suite(rng: np.random.Generator, delta: float = 100.0, T_range=(0.004, 0.04), xi0: float = 5.0,
                     n_T: int = 6, grid: PhaseGrid | None = None) -> tuple[list[CheckResult], harness.CommutatorResult]:
    t0 = time.perf_counter()
    g = grid or PhaseGrid(1, 32, 32, 8.0)
    sym = msymbol.SymbolParams(delta, 0.5)
    f = commutator_field(rng, g, xi0)
    phi = np.cos(g.x_nodes())
    Ts = np.geomspace(T_range[0], T_range[1], n_T)
    res = harness.commutator_x_experiment(phi, f, Ts, sym)
    const = harness.commutator_x_experiment(np.full(g.x_shape, 2.5), f, Ts[:1], sym)
    spread = float(res.ratios.max() / res.ratios.min())
    out = [
        _check("commutator_constant_phi", float(const.norms[0]), 1e-13, const.norms[0] <= 1e-13),
        _check("commutator_raw_slope", res.slope, 1.0, 0.8 <= res.slope <= 1.2, "||[M,phi]f|| vs T, window [0.8, 1.2]"),
        _check("commutator_normalized_slope", res.normalized_slope, 1.0, 0.8 <= res.normalized_slope <= 1.2,
               "||[M,phi]f|| / ||Mf|| vs T, window [0.8, 1.2]"),
        _check("commutator_ratio_spread", spread, 10.0, spread <= 10.0, "max r(T) / min r(T)"),
        _check("commutator_ratio_max", float(res.ratios.max()), float("inf"), bool(np.all(np.isfinite(res.ratios)))),
    ]
    elapsed = time.perf_counter() - t0
    out.append(_check("commutator_runtime_s", elapsed, 120.0, elapsed < 120.0))
    return out, res
