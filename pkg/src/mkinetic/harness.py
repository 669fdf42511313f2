"""Twin-run stability experiments and M-weighted energy diagnostics.

Uniqueness itself is a statement about zero perturbations, so the harness
measures what can be measured on a grid: determinism of identical runs, the
linear response of the solution difference to small perturbations, and the
mode-by-mode energy inequality that drives the uniqueness argument.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .dyadic import DyadicPartition
from .msymbol import SymbolParams
from .solver import SolverConfig, Trajectory, make_initial, run
from .spectral import Field, PhaseGrid, mollify, mollify_density

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "UniquenessReport",
    "EnergyReport",
    "CommutatorResult",
    "MollifierSeries",
    "twin_run",
    "stability_sweep",
    "dt_convergence",
    "m_weighted_energy",
    "ring_energy",
    "ring_decompose",
    "commutator_x_experiment",
    "mollifier_convergence",
    "loglog_slope",
    "mode_invariants",
    "dissipation_kernel",
]

PERTURBATIONS = ("initial", "resolution", "dt")


@dataclass(frozen=True)
class ExperimentConfig:
    base_run: SolverConfig
    grid: PhaseGrid
    perturbation: str = "initial"
    magnitude: float = 0.0
    symbol: SymbolParams = field(default_factory=lambda: SymbolParams(1.0, 0.5))
    ring_beta: float = 0.0
    T0: float | None = None
    mollifier_radii: tuple[float, ...] = (2.4, 1.6, 1.2, 0.8)
    ring_m: float = 4.0
    initial: str = "maxwellian"
    initial_rho: float = 0.05
    initial_amplitude: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.perturbation not in PERTURBATIONS:
            raise ValueError(f"perturbation must be one of {PERTURBATIONS}, got {self.perturbation!r}")
        if self.magnitude < 0:
            raise ValueError("perturbation magnitude must be nonnegative")
        T0 = self.horizon
        if T0 > self.base_run.t_end + 1e-12:
            raise ValueError(f"T0={T0} exceeds t_end={self.base_run.t_end}")
        k0 = self.base_run.params.k0
        if not 3 < self.ring_m <= k0 or self.ring_m + self.ring_beta > k0:
            raise ValueError(f"need 3 < m <= k0 and m + beta <= k0 (m={self.ring_m}, beta={self.ring_beta}, k0={k0})")

    @property
    def horizon(self) -> float:
        return self.base_run.t_end if self.T0 is None else self.T0


@dataclass
class EnergyReport:
    base: float
    dissipation: float
    bound: float
    ring_lhs: float = 0.0
    ring_dissipation: float = 0.0
    ring_bound: float = 0.0

    @property
    def lapl_holds(self) -> bool:
        return self.dissipation <= self.bound * (1 + 1e-9) + 1e-300

    @property
    def ring_holds(self) -> bool:
        return self.ring_dissipation <= self.ring_bound * (1 + 1e-9) + 1e-300


@dataclass
class MollifierSeries:
    radii: np.ndarray
    eps_rho: np.ndarray
    eps_phase: np.ndarray

    def decreasing(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.eps_rho) <= tol) and np.all(np.diff(self.eps_phase) <= tol))


@dataclass
class CommutatorResult:
    T: np.ndarray
    norms: np.ndarray  # ||M(phi f) - phi M f||
    m_norms: np.ndarray  # ||M f||
    ratios: np.ndarray
    slope: float
    h5_norm: float

    @property
    def normalized_slope(self) -> float:
        """Slope of ||[M, phi] f|| / ||M f|| against T, the operator-norm scaling."""
        return loglog_slope(self.T, self.norms / np.where(self.m_norms > 0, self.m_norms, np.nan))


@dataclass
class UniquenessReport:
    times: np.ndarray
    distance_series: np.ndarray
    weighted_energy: EnergyReport
    epsilon_a_series: MollifierSeries | None
    commutator_ratios: np.ndarray | None
    ledgers: dict
    verdict: dict

    @property
    def sup_distance(self) -> float:
        return float(np.max(self.distance_series)) if self.distance_series.size else 0.0

    @property
    def bound_violations(self) -> list[str]:
        return [k for k, ok in self.verdict.items() if not ok]

    @property
    def passed(self) -> bool:
        return not self.bound_violations

    def rows(self):
        """(t, distance) rows for report.csv."""
        return list(zip(self.times.tolist(), self.distance_series.tolist()))


# -- mode-space energy ----------------------------------------------------------

def mode_invariants(g: PhaseGrid):
    """|xi|^2, xi.eta and |eta|^2 on the full (eta, xi) mode grid, broadcastable."""
    eta = g.eta_mesh()
    xi = g.xi_mesh()
    xx = xi[0] ** 2 + xi[1] ** 2 + xi[2] ** 2
    xe = sum(xi[i] * eta[i] for i in range(3))
    ee = sum(e * e for e in eta)
    return xx, xe, ee


def _graded_nodes(length: float, finest: float, order: int = 8):
    """Gauss-Legendre nodes on [0, length], panels halving toward 0 down to `finest`."""
    if length <= 0:
        return np.zeros(0), np.zeros(0)
    levels = max(2, int(math.ceil(math.log2(max(length / finest, 1.0)))) + 2)
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.concatenate([[0.0], length * 0.5 ** np.arange(levels, -1, -1)])
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * x[None]
    weights = half[:, None] * w[None]
    return nodes.ravel(), weights.ravel()


def dissipation_kernel(xx, xe, ee, strength: float, p: float, length: float) -> np.ndarray:
    """K = int_0^length |xi|^2 (1 + strength Phi(s))^(-2p) ds, Phi at s = T - t.

    The integrand decays on the scale 1 / (strength <xi>^2), which sets the
    finest panel.
    """
    xx, xe, ee = np.broadcast_arrays(xx, xe, ee)
    if xx.size == 0:
        return np.zeros(xx.shape)
    finest = 0.05 / (strength * (1.0 + float(np.max(xx)) + float(np.max(ee))))
    s, w = _graded_nodes(length, finest)
    out = np.zeros(xx.shape)
    one_xx = 1.0 + xx
    for si, wi in zip(s, w):
        base = 1.0 + strength * (si * one_xx - si * si * xe + (si**3 / 3.0) * ee)
        if p == 1.0:
            r = 1.0 / base
            out += wi * r * r
        else:
            out += wi * base ** (-2.0 * p)
    return out * xx


def _modes(values: np.ndarray, g: PhaseGrid) -> np.ndarray:
    return sfft.fftn(values, norm="ortho") * math.sqrt(g.cell_volume)


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    if times.size < 2:
        return np.zeros_like(times)
    dt = np.diff(times)
    w = np.zeros_like(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _time_energy(snaps: list[np.ndarray], times: np.ndarray, g: PhaseGrid, strength: float, p: float,
                 T0: float, extra: float = 1.0, rel_cut: float = 1e-16) -> tuple[float, float]:
    """(int ||w||^2 dt, int_0^T0 int_t^T0 extra |xi|^2 M^2 |w_hat|^2 dT dt) with trapezoid weights in t."""
    xx, xe, ee = mode_invariants(g)
    wt = _trapezoid_weights(times)
    base = 0.0
    diss = 0.0
    for vals, t, w in zip(snaps, times, wt):
        if w == 0.0:
            continue
        power = np.abs(_modes(vals, g)) ** 2
        total = float(power.sum())
        base += w * total
        if total == 0.0 or T0 - t <= 0:
            continue
        # modes this far below the peak change the functional by < rel_cut * size relative
        mask = power > rel_cut * power.max()
        bx = np.broadcast_to(xx, power.shape)[mask]
        be = np.broadcast_to(xe, power.shape)[mask]
        bee = np.broadcast_to(ee, power.shape)[mask]
        K = dissipation_kernel(bx, be, bee, strength, p, T0 - t)
        diss += w * extra * float(np.sum(K * power[mask]))
    return base, diss


def m_weighted_energy(w: list[Field], sym: SymbolParams, T0: float) -> tuple[float, float]:
    """Base energy int_0^T0 ||w||^2 dt and the (unweighted) dissipation functional.

    The dissipation is int_0^T0 int_0^T ||grad_v M(t, T) w(t)||^2 dt dT,
    evaluated in mode space as sum |xi|^2 M^2 |w_hat|^2.  The T integral is
    done per mode with graded Gauss-Legendre, the t integral with trapezoid
    weights on the snapshot times, so the inequality dissipation <= 2/(eps
    delta) * base carries over from the symbol level mode by mode.
    """
    snaps = [f for f in w if f.time <= T0 + 1e-12]
    if not snaps:
        return 0.0, 0.0
    g = snaps[0].grid
    times = np.array([f.time for f in snaps])
    return _time_energy([f.values for f in snaps], times, g, sym.delta, sym.p, T0)


def ring_decompose(w: Field, part: DyadicPartition, m: float) -> list[np.ndarray]:
    """w_n = theta_n(v) <v>^m w for n = 0..n_max."""
    g = w.grid
    r = g.speed()
    W = w.values * g.weight(m)
    return [W * part.theta_radial(k, r) for k in range(part.n_max + 1)]


def ring_energy(w: list[Field], part: DyadicPartition, m: float, delta: float, beta: float,
                T0: float) -> tuple[float, float, float]:
    """(LHS, dissipation, bound) for the ring-weighted functional.

    LHS = 1/2 sum_n int ||w_n||^2 dt, dissipation = sum_n int int 2^(beta n)
    ||grad_v M_n w_n||^2 with M_n of exponent 1 and strength delta 2^(beta n).
    Each ring obeys dissipation_n <= (4 / delta) int ||w_n||^2.
    """
    snaps = [f for f in w if f.time <= T0 + 1e-12]
    if not snaps:
        return 0.0, 0.0, 0.0
    g = snaps[0].grid
    times = np.array([f.time for f in snaps])
    rings = [ring_decompose(f, part, m) for f in snaps]
    lhs = diss = 0.0
    for n in range(part.n_max + 1):
        scale = 2.0 ** (beta * n)
        b, d = _time_energy([r[n] for r in rings], times, g, delta * scale, 1.0, T0, extra=scale)
        lhs += b
        diss += d
    return 0.5 * lhs, diss, (4.0 / delta) * lhs


# -- field-level checks -----------------------------------------------------------

def loglog_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    good = (x > 0) & (y > 0)
    if good.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[good]), np.log(y[good]), 1)[0])


def h5_norm(phi: np.ndarray, g: PhaseGrid) -> float:
    """sqrt(sum <eta>^10 |phi_hat|^2) with phi_hat normalized by the torus volume."""
    F = sfft.fftn(phi) / phi.size
    eta2 = sum(
        sfft.fftfreq(g.n_x, 1.0 / g.n_x).reshape([-1 if i == a else 1 for i in range(g.dim_x)]) ** 2
        for a in range(g.dim_x)
    )
    return float(np.sqrt(np.sum((1.0 + eta2) ** 5 * np.abs(F) ** 2) * (2 * math.pi) ** g.dim_x))


def _apply_m(values: np.ndarray, g: PhaseGrid, sym: SymbolParams, t: float, T: float) -> np.ndarray:
    xx, xe, ee = mode_invariants(g)
    s = T - t
    phi = s * (1.0 + xx) - s * s * xe + s**3 * ee / 3.0
    m = (1.0 + sym.delta * phi) ** (-sym.p)
    return sfft.ifftn(sfft.fftn(values) * m).real


def commutator_x_experiment(phi: np.ndarray, f: Field, T_list, sym: SymbolParams, t: float = 0.0) -> CommutatorResult:
    """||M(phi f) - phi M f|| against T, normalized by T ||phi||_H5 ||M f||."""
    g = f.grid
    phi = np.asarray(phi, dtype=float)
    if phi.shape != g.x_shape:
        raise ValueError("phi must live on the spatial grid")
    ph = phi.reshape(g.x_shape + (1, 1, 1))
    h5 = h5_norm(phi, g)
    Ts = np.asarray(list(T_list), dtype=float)
    norms, mnorms, ratios = [], [], []
    vol = g.cell_volume
    for T in Ts:
        mf = _apply_m(f.values, g, sym, t, T)
        comm = _apply_m(ph * f.values, g, sym, t, T) - ph * mf
        cn = math.sqrt(float(np.sum(comm**2)) * vol)
        mn = math.sqrt(float(np.sum(mf**2)) * vol)
        norms.append(cn)
        mnorms.append(mn)
        ratios.append(cn / ((T - t) * h5 * mn) if (T > t and mn > 0 and h5 > 0) else 0.0)
    norms = np.array(norms)
    return CommutatorResult(Ts, norms, np.array(mnorms), np.array(ratios), loglog_slope(Ts - t, norms), h5)


def mollifier_convergence(f, radii, m: float = 4.0, beta: float = 0.0, kernel: str = "bump") -> MollifierSeries:
    """Sup-norm mollification gaps for rho and for <v>^(m + |beta|/2) f.

    `f` is a Field or a list of Fields (trajectory); gaps are maximized over
    the snapshots.  The density is mollified in x, the weighted field in (x, v).
    """
    fields = [f] if isinstance(f, Field) else list(f)
    radii = np.asarray(list(radii), dtype=float)
    if np.any(np.diff(radii) > 0):
        raise ValueError("radii must be decreasing")
    er = np.zeros(radii.size)
    ep = np.zeros(radii.size)
    for fld in fields:
        g = fld.grid
        rho = fld.values.sum(axis=g.v_axes) * g.dv3
        G = fld.with_values(fld.values * g.weight(m + abs(beta) / 2))
        for i, a in enumerate(radii):
            er[i] = max(er[i], float(np.max(np.abs(rho - mollify_density(rho, g, a, kernel)))))
            ep[i] = max(ep[i], float(np.max(np.abs(G.values - mollify(G, a, kernel).values))))
    return MollifierSeries(radii, er, ep)


# -- twin runs ------------------------------------------------------------------

def _bump(g: PhaseGrid) -> np.ndarray:
    """Smooth perturbation shape with sup 1."""
    x1 = g.x_mesh()[0]
    v = g.v_mesh()
    b = np.sin(x1) * np.cos(0.5 * v[0]) * np.exp(-(v[0] ** 2 + v[1] ** 2 + v[2] ** 2) / 16.0)
    b = np.broadcast_to(b, g.shape)
    return b / np.max(np.abs(b))


def _restrict(f: Field, coarse: PhaseGrid) -> Field:
    fg = f.grid
    step = fg.n_v // coarse.n_v
    xs = fg.n_x // coarse.n_x
    sl = tuple([slice(None, None, xs)] * fg.dim_x + [slice(None, None, step)] * 3)
    return Field(f.values[sl].copy(), coarse, f.time)


def _initial(cfg: ExperimentConfig, g: PhaseGrid) -> Field:
    return make_initial(cfg.initial, g, rho=cfg.initial_rho, amplitude=cfg.initial_amplitude)


def _pair(cfg: ExperimentConfig) -> tuple[Trajectory, list[Field]]:
    """Run the base and perturbed solutions; returns (base trajectory, perturbed snapshots on the base grid)."""
    g = cfg.grid
    f0 = _initial(cfg, g)
    base = run(f0, cfg.base_run, keep_every=1)
    kind = cfg.perturbation
    if kind == "initial":
        g0 = f0.with_values(f0.values * (1.0 + cfg.magnitude * _bump(g)))
        other = run(g0, cfg.base_run, keep_every=1).snapshots
    elif kind == "resolution":
        fine = PhaseGrid(g.dim_x, g.n_x, 2 * g.n_v, g.l_v)
        traj = run(_initial(cfg, fine), cfg.base_run, keep_every=1)
        other = [_restrict(s, g) for s in traj.snapshots]
    else:
        half = replace(cfg.base_run, dt=0.5 * cfg.base_run.dt)
        if not np.isclose((half.dt / g.dxi), round(half.dt / g.dxi)):
            raise ValueError("dt-change perturbation needs dt to be an even multiple of dxi")
        other = run(f0, half, keep_every=2).snapshots
    return base, other


def twin_run(cfg: ExperimentConfig, with_mollifier: bool = True) -> UniquenessReport:
    base, other = _pair(cfg)
    snaps = base.snapshots
    n = min(len(snaps), len(other))
    times = np.array([s.time for s in snaps[:n]])
    g = cfg.grid
    vol = g.cell_volume
    dist = np.array([math.sqrt(float(np.sum((b.values - o.values) ** 2)) * vol) for b, o in zip(snaps[:n], other[:n])])

    T0 = cfg.horizon
    wm = g.weight(cfg.ring_m)
    w = [Field((o.values - b.values) * wm, g, b.time) for b, o in zip(snaps[:n], other[:n])]
    base_e, diss = m_weighted_energy(w, cfg.symbol, T0)
    part = DyadicPartition.for_box(g.l_v)
    wraw = [Field(o.values - b.values, g, b.time) for b, o in zip(snaps[:n], other[:n])]
    r_lhs, r_diss, r_bound = ring_energy(wraw, part, cfg.ring_m, cfg.symbol.delta, cfg.ring_beta, T0)
    energy = EnergyReport(base_e, diss, cfg.symbol.dissipation_bound() * base_e, r_lhs, r_diss, r_bound)

    eps = mollifier_convergence(snaps[:n], cfg.mollifier_radii, cfg.ring_m, cfg.ring_beta) if with_mollifier else None

    c0 = cfg.base_run.params.c0
    ledgers = {
        "mass_drift": base.mass_drift(),
        "min_f": float(base.series("min_f").min()),
        "rho_min": float(base.series("rho_min").min()),
        "first_rho_violation": base.first_rho_violation,
        "c1": c0 / 8 * 4.0 ** (-min(cfg.ring_beta, 0.0)),
        "sup_distance": float(dist.max()) if dist.size else 0.0,
    }
    verdict = {
        "lapl_inequality": energy.lapl_holds,
        "ring_inequality": energy.ring_holds,
        "mass_conservation": ledgers["mass_drift"] < 1e-8,
        "finite": bool(np.all(np.isfinite(dist))) and math.isfinite(diss),
    }
    if cfg.base_run.model == "toy":
        verdict["rho_lower_bound"] = base.first_rho_violation is None
    if cfg.perturbation == "initial" and cfg.magnitude == 0.0:
        verdict["zero_distance"] = bool(np.all(dist == 0.0))
    return UniquenessReport(times, dist, energy, eps, None, ledgers, verdict)


def stability_sweep(cfg: ExperimentConfig, magnitudes=(1e-2, 1e-3, 1e-4)) -> tuple[np.ndarray, np.ndarray, float, list]:
    """sup_t ||f - g|| for each initial-perturbation size and the log-log slope."""
    reports = []
    sups = []
    for d in magnitudes:
        rep = twin_run(replace(cfg, perturbation="initial", magnitude=float(d)), with_mollifier=False)
        reports.append(rep)
        sups.append(rep.sup_distance)
    mags = np.asarray(magnitudes, dtype=float)
    sups = np.asarray(sups)
    return mags, sups, loglog_slope(mags, sups), reports


def dt_convergence(cfg: ExperimentConfig, dts) -> tuple[np.ndarray, np.ndarray, float]:
    """Distance at t_end between runs with dt and dt/2, against dt."""
    dists = []
    for dt in dts:
        c = replace(cfg, base_run=replace(cfg.base_run, dt=float(dt)), perturbation="dt")
        base, other = _pair(c)
        n = min(len(base.snapshots), len(other))
        b, o = base.snapshots[n - 1], other[n - 1]
        dists.append(math.sqrt(float(np.sum((b.values - o.values) ** 2)) * cfg.grid.cell_volume))
    dts = np.asarray(dts, dtype=float)
    dists = np.asarray(dists)
    return dts, dists, loglog_slope(dts, dists)
