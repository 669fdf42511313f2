"""Operator-splitting time integration for the toy model and viscous Landau.

Each step composes the exact transport shear with an explicit collision
substep.  The collision substep is SSP-RK3 on the pseudo-spectral right-hand
side, sub-cycled so that every stage respects the diffusion (and, for Landau,
drift) stability limit.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .landau import LandauOperator, ModelParams, ToyOperator
from .spectral import (
    Field,
    PhaseGrid,
    is_aligned,
    shell_ratio,
    shear_values,
    values_moments,
    write_snapshot,
)

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "StepDiagnostics",
    "Trajectory",
    "SolverAbort",
    "Stepper",
    "step",
    "run",
    "validate_initial",
    "InitialReport",
    "make_initial",
    "INITIAL_FAMILIES",
    "DIAGNOSTIC_HEADER",
]

DIAGNOSTIC_HEADER = ("t", "mass", "px", "py", "pz", "energy", "min_f", "rho_min", "wsup_k0")
GROWTH_LIMIT = 10.0
MODELS = ("toy", "landau")
SCHEMES = ("lie", "strang")


class SolverAbort(RuntimeError):
    def __init__(self, message: str, time: float, diagnostics: "StepDiagnostics | None" = None):
        super().__init__(message)
        self.time = time
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SolverConfig:
    model: str = "toy"
    dt: float = math.pi / 8
    t_end: float = 1.0
    scheme: str = "strang"
    cfl_safety: float = 0.4
    params: ModelParams = field(default_factory=ModelParams)
    collision: bool = True
    monitor_positivity: bool = True
    monitor_rho: bool = True
    monitor_weighted_sup: bool = True
    conservative: bool = True

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must be in (0, 1], got {self.cfl_safety}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def check_grid(self, g: PhaseGrid) -> None:
        if not is_aligned(self.dt, g):
            raise ValueError(f"dt={self.dt} is not a multiple of dxi={g.dxi} (pi / l_v)")


@dataclass
class StepDiagnostics:
    time: float
    mass: float
    momentum: np.ndarray
    energy: float
    min_f: float
    rho_min: float
    weighted_sup: float
    l2: float = 0.0
    substeps: int = 0

    def row(self) -> list[float]:
        return [self.time, self.mass, *map(float, self.momentum), self.energy, self.min_f, self.rho_min, self.weighted_sup]


def diagnose(values: np.ndarray, g: PhaseGrid, t: float, k0: float, substeps: int = 0) -> StepDiagnostics:
    rho, mom, en = values_moments(values, g)
    dxd = g.dxd
    wsup = float(np.max(np.abs(values) * g.weight(k0)))
    return StepDiagnostics(
        time=t,
        mass=float(rho.sum() * dxd),
        momentum=mom.reshape(3, -1).sum(axis=1) * dxd,
        energy=float(en.sum() * dxd),
        min_f=float(values.min()),
        rho_min=float(rho.min()),
        weighted_sup=wsup,
        l2=float(np.sqrt(np.sum(values**2) * g.cell_volume)),
        substeps=substeps,
    )


class Stepper:
    """Holds the collision operator for one grid and advances raw arrays."""

    def __init__(self, g: PhaseGrid, cfg: SolverConfig):
        cfg.check_grid(g)
        self.g = g
        self.cfg = cfg
        if cfg.model == "toy":
            self.op = ToyOperator(g, cfg.params.beta)
        else:
            self.op = LandauOperator(g, cfg.params.nu, conservative=cfg.conservative)

    def _diffusion_limit(self, lam: float) -> float:
        if lam <= 0:
            return math.inf
        return self.cfg.cfl_safety * self.g.dv**2 / (2 * 3 * lam)

    def collide(self, u: np.ndarray, h: float) -> tuple[np.ndarray, int]:
        """Advance the collision/diffusion part over time h; returns (u, substeps)."""
        if not self.cfg.collision or h == 0:
            return u, 0
        if self.cfg.model == "toy":
            return self._collide_toy(u, h)
        return self._collide_landau(u, h)

    def _collide_toy(self, u: np.ndarray, h: float):
        rho = u.sum(axis=self.g.v_axes) * self.g.dv3
        # rho is invariant under the collision substep, so freezing it is exact
        lam = self.op.max_coefficient(rho)
        limit = self._diffusion_limit(lam)
        if math.isinf(limit):
            return u, 0
        nsub = max(1, math.ceil(h / limit - 1e-12))
        k = h / nsub
        L = lambda w: self.op(w, rho)
        for _ in range(nsub):
            u = _ssp_rk3(u, k, L)
        return u, nsub

    def _collide_landau(self, u: np.ndarray, h: float):
        op = self.op
        remaining = h
        count = 0
        while remaining > 1e-14 * h:
            coeffs = op.coefficients(u)
            lam = op.max_coefficient(coeffs)
            limit = self._diffusion_limit(lam)
            drift = op.max_drift(coeffs)
            if drift > 0:
                limit = min(limit, self.cfg.cfl_safety * math.sqrt(3.0) * self.g.dv / (math.pi * drift))
            nsub = max(1, math.ceil(remaining / limit - 1e-12))
            k = remaining / nsub
            first = [coeffs]

            def L(w):
                c = first.pop() if first else None
                return op(w, c)

            u = _ssp_rk3(u, k, L)
            remaining -= k
            count += 1
        return u, count

    def transport(self, u: np.ndarray, h: float) -> np.ndarray:
        return shear_values(u, self.g, h)

    def advance(self, u: np.ndarray) -> tuple[np.ndarray, int]:
        dt = self.cfg.dt
        if self.cfg.scheme == "lie":
            u = self.transport(u, dt)
            u, n = self.collide(u, dt)
            return u, n
        u, n1 = self.collide(u, 0.5 * dt)
        u = self.transport(u, dt)
        u, n2 = self.collide(u, 0.5 * dt)
        return u, n1 + n2


def _ssp_rk3(u: np.ndarray, h: float, L) -> np.ndarray:
    u1 = u + h * L(u)
    u2 = 0.75 * u + 0.25 * (u1 + h * L(u1))
    return u / 3.0 + (2.0 / 3.0) * (u2 + h * L(u2))


def step(state: Field, cfg: SolverConfig, stepper: Stepper | None = None) -> tuple[Field, StepDiagnostics]:
    g = state.grid
    if not np.all(np.isfinite(state.values)):
        raise ValueError("state contains non-finite values")
    st = stepper or Stepper(g, cfg)
    before = float(np.sqrt(np.sum(state.values**2)))
    u, nsub = st.advance(state.values)
    t = state.time + cfg.dt
    diag = diagnose(u, g, t, cfg.params.k0, nsub)
    after = float(np.sqrt(np.sum(u**2)))
    if not np.isfinite(after) or (before > 0 and after > GROWTH_LIMIT * before):
        raise SolverAbort(f"L2 norm grew from {before:.3e} to {after:.3e} in one step at t={t:.4g}", t, diag)
    return Field(u, g, t), diag


@dataclass
class Trajectory:
    grid: PhaseGrid
    config: SolverConfig
    diagnostics: list[StepDiagnostics]
    snapshots: list[Field]
    aborted: bool = False
    abort_reason: str = ""
    first_rho_violation: float | None = None
    min_f_floor: float = -1e-10

    @property
    def times(self) -> np.ndarray:
        return np.array([d.time for d in self.diagnostics])

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.diagnostics])

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    def mass_drift(self) -> float:
        m = self.series("mass")
        return float(np.max(np.abs(m - m[0])) / abs(m[0])) if m[0] != 0 else float(np.max(np.abs(m)))

    def momentum_drift(self) -> float:
        """Largest momentum change, relative to the initial mass."""
        p = np.stack([d.momentum for d in self.diagnostics])
        m0 = self.diagnostics[0].mass
        return float(np.max(np.abs(p - p[0])) / abs(m0)) if m0 else float(np.max(np.abs(p)))

    def energy_ledger_error(self) -> float:
        """max |E(t) - E(0) - 6 nu mass t| / E(0)."""
        nu = self.config.params.nu
        t = self.times
        e = self.series("energy")
        m0 = self.diagnostics[0].mass
        pred = e[0] + 6.0 * nu * m0 * (t - t[0])
        return float(np.max(np.abs(e - pred)) / abs(e[0])) if e[0] else float(np.max(np.abs(e - pred)))

    def positivity_ok(self) -> bool:
        return float(self.series("min_f").min()) >= self.min_f_floor

    def write_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(DIAGNOSTIC_HEADER)
            for d in self.diagnostics:
                w.writerow([repr(float(x)) for x in d.row()])


def run(
    initial: Field,
    cfg: SolverConfig,
    keep_every: int = 1,
    out_dir=None,
    snapshot_every: int = 0,
    header_lines=(),
    validate: bool = True,
) -> Trajectory:
    """Integrate from `initial` to t_end.

    Snapshots are kept in memory every `keep_every` steps (0 keeps only the
    endpoints) and written as MKIN1 files every `snapshot_every` steps when
    `out_dir` is given.  A solver abort ends the run early and is recorded on
    the trajectory rather than raised.
    """
    g = initial.grid
    cfg.check_grid(g)
    if validate:
        rep = validate_initial(initial, cfg.params, cfg.model)
        if not rep.passed:
            # the toy conditions are hypotheses of the model; Landau smallness is only reported
            if cfg.model == "toy":
                raise ValueError("initial data failed validation: " + rep.summary())
            log.warning("initial data outside the small-data regime: %s", rep.summary())
    st = Stepper(g, cfg)
    k0 = cfg.params.k0
    state = initial.copy()
    diags = [diagnose(state.values, g, state.time, k0)]
    snaps = [state]
    traj = Trajectory(g, cfg, diags, snaps)
    half_c0 = 0.5 * cfg.params.c0
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if snapshot_every:
            write_snapshot(out / "snap_00000.mkin", state)
    n = cfg.n_steps
    for i in range(1, n + 1):
        try:
            state, d = step(state, cfg, st)
        except SolverAbort as exc:
            log.error("solver abort: %s", exc)
            traj.aborted = True
            traj.abort_reason = str(exc)
            if exc.diagnostics is not None:
                diags.append(exc.diagnostics)
            break
        diags.append(d)
        if cfg.model == "toy" and cfg.monitor_rho and traj.first_rho_violation is None and d.rho_min < half_c0:
            traj.first_rho_violation = d.time
            log.warning("rho_min %.4g fell below c0/2 at t=%.4g", d.rho_min, d.time)
        if cfg.monitor_positivity and d.min_f < traj.min_f_floor:
            log.debug("min_f %.3e at t=%.4g", d.min_f, d.time)
        if (keep_every and i % keep_every == 0) or i == n:
            snaps.append(state)
        if out is not None and snapshot_every and (i % snapshot_every == 0 or i == n):
            write_snapshot(out / f"snap_{i:05d}.mkin", state)
    if out is not None:
        traj.write_csv(out / "diagnostics.csv", header_lines)
    return traj


# -- initial data --------------------------------------------------------------

@dataclass
class Check:
    name: str
    value: float
    bound: float
    passed: bool
    relation: str = "<="


@dataclass
class InitialReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def by_name(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        return "; ".join(
            f"{c.name}={c.value:.3g} ({c.relation} {c.bound:.3g}) {'ok' if c.passed else 'FAIL'}" for c in self.checks
        )


def validate_initial(f0: Field, params: ModelParams, model: str = "toy", shell_tol: float = 1e-6) -> InitialReport:
    """Positivity, sup bound, weighted decay at the box edge, and the model's lower/smallness condition."""
    g = f0.grid
    vals = f0.values
    checks = [
        Check("positivity", float(vals.min()), 0.0, bool(vals.min() >= 0.0), ">="),
        Check("sup_bound", float(vals.max()), params.m0, bool(vals.max() <= params.m0)),
    ]
    ratio = shell_ratio(vals, g, params.k0)
    checks.append(Check(f"weighted_decay_k{params.k0:g}", ratio, shell_tol, bool(ratio <= shell_tol)))
    if model == "toy":
        rho = vals.sum(axis=g.v_axes) * g.dv3
        checks.append(Check("rho_lower", float(rho.min()), params.c0, bool(rho.min() > params.c0), ">"))
    else:
        w = g.weight(params.m)
        n = g.n_v
        blocks = (np.abs(vals) * w).reshape(-1, n, n, n).reshape(-1, n**3)
        l4 = (np.sum(blocks**4, axis=1) * g.dv3) ** 0.25
        l1 = np.sum(blocks, axis=1) * g.dv3
        small = float(max(l4.max(), l1.max()))
        checks.append(Check("smallness", small, params.c0, bool(small <= params.c0)))
    return InitialReport(checks)


def _maxwellian(g: PhaseGrid, temperature: float = 1.0, u=(0.0, 0.0, 0.0)) -> np.ndarray:
    v = g.v_mesh()
    r2 = sum((v[i] - u[i]) ** 2 for i in range(3))
    return np.exp(-r2 / (2 * temperature)) / (2 * math.pi * temperature) ** 1.5


def _spatial(g: PhaseGrid, amplitude: float, mode: int) -> np.ndarray:
    x1 = g.x_mesh()[0]
    return 1.0 + amplitude * np.cos(mode * x1)


def make_initial(
    name: str,
    g: PhaseGrid,
    rho: float = 1.0,
    amplitude: float = 0.1,
    mode: int = 1,
    temperature: float = 1.0,
    drift: float = 1.0,
) -> Field:
    """Built-in families: maxwellian, perturbed-maxwellian, two-bump."""
    if name == "maxwellian":
        vals = rho * _spatial(g, amplitude, mode) * _maxwellian(g, temperature)
    elif name == "perturbed-maxwellian":
        v1 = g.v_mesh()[0]
        x1 = g.x_mesh()[0]
        shape = 1.0 + amplitude * np.sin(mode * x1) * v1 * np.exp(-0.5 * v1**2)
        vals = rho * _spatial(g, amplitude, mode) * _maxwellian(g, temperature) * shape
    elif name == "two-bump":
        u = (drift, 0.0, 0.0)
        mu = (-drift, 0.0, 0.0)
        vals = 0.5 * rho * _spatial(g, amplitude, mode) * (_maxwellian(g, temperature, u) + _maxwellian(g, temperature, mu))
    else:
        raise ValueError(f"unknown initial family {name!r}; expected one of {INITIAL_FAMILIES}")
    return Field(np.broadcast_to(vals, g.shape).copy(), g, 0.0)


INITIAL_FAMILIES = ("maxwellian", "perturbed-maxwellian", "two-bump")
