"""INI-style run configuration.

One file determines a run.  Sections and keys (defaults in parentheses):

[grid]        dim_x (1), n_x (32), n_v (32), l_v (8.0)
[model]       name (toy), nu (0.0), beta (0.0), m (4.0), k0 (10.0), c0 (0.01), m0 (1.0)
[solver]      dt_multiple (1) or dt, n_steps (16) or t_end, scheme (strang),
              cfl_safety (0.4), snapshot_every (0), conservative (yes)
[initial]     family (maxwellian), rho (1.0), amplitude (0.1), mode (1),
              temperature (1.0), drift (1.0), path (unset: use family)
[symbol]      delta (1.0), epsilon (0.5), exponent_p (1/2 + epsilon), ring_beta (0.0)
[experiment]  perturbation (initial), magnitude (0.0), magnitudes (1e-2 1e-3 1e-4),
              T0 (t_end), mollifier_radii (2.4 1.6 1.2 0.8), ring_m (4.0),
              dt_multiples (8 4 2), commutator_delta (100), commutator_T (0.004 0.04),
              commutator_xi0 (5.0), sweep (no)
[verify]      symbol_samples (10000), bound_samples (1000), partition_samples (10000),
              landau_n_v (64), landau_fields (10)

Unknown sections or keys are rejected so that typos cannot silently fall
back to defaults.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .landau import ModelParams
from .msymbol import SymbolParams
from .solver import INITIAL_FAMILIES, SolverConfig
from .spectral import PhaseGrid

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "SCHEMA"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


SCHEMA: dict[str, dict[str, object]] = {
    "grid": {"dim_x": 1, "n_x": 32, "n_v": 32, "l_v": 8.0},
    "model": {"name": "toy", "nu": 0.0, "beta": 0.0, "m": 4.0, "k0": 10.0, "c0": 0.01, "m0": 1.0},
    "solver": {
        "dt_multiple": 1,
        "dt": None,
        "n_steps": 16,
        "t_end": None,
        "scheme": "strang",
        "cfl_safety": 0.4,
        "snapshot_every": 0,
        "conservative": True,
    },
    "initial": {
        "family": "maxwellian",
        "rho": 1.0,
        "amplitude": 0.1,
        "mode": 1,
        "temperature": 1.0,
        "drift": 1.0,
        "path": None,
    },
    "symbol": {"delta": 1.0, "epsilon": 0.5, "exponent_p": None, "ring_beta": 0.0},
    "experiment": {
        "perturbation": "initial",
        "magnitude": 0.0,
        "magnitudes": (1e-2, 1e-3, 1e-4),
        "T0": None,
        "mollifier_radii": (2.4, 1.6, 1.2, 0.8),
        "ring_m": 4.0,
        "dt_multiples": (8, 4, 2),
        "commutator_delta": 100.0,
        "commutator_T": (0.004, 0.04),
        "commutator_xi0": 5.0,
        "sweep": False,
    },
    "verify": {
        "symbol_samples": 10000,
        "bound_samples": 1000,
        "partition_samples": 10000,
        "landau_n_v": 64,
        "landau_fields": 10,
    },
}


def _convert(section: str, key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "yes", "true", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = raw.replace(",", " ").split()
            kind = type(default[0])
            return tuple(kind(x) for x in items)
        if default is None:
            if key == "path":
                return raw.strip()
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


@dataclass(frozen=True)
class RunConfig:
    values: dict
    source: str = "<defaults>"
    explicit: frozenset = frozenset()

    def is_set(self, section: str, key: str) -> bool:
        return (section, key) in self.explicit

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def canonical(self) -> str:
        return json.dumps(self.values, sort_keys=True, default=list)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    # typed views
    def grid(self) -> PhaseGrid:
        g = self["grid"]
        try:
            return PhaseGrid(g["dim_x"], g["n_x"], g["n_v"], g["l_v"])
        except ValueError as exc:
            raise ConfigError(f"[grid] {exc}") from None

    def model_params(self) -> ModelParams:
        m = self["model"]
        try:
            return ModelParams(nu=m["nu"], beta=m["beta"], m=m["m"], k0=m["k0"], c0=m["c0"], m0=m["m0"])
        except ValueError as exc:
            raise ConfigError(f"[model] {exc}") from None

    def solver(self, model: str | None = None) -> SolverConfig:
        s = self["solver"]
        g = self.grid()
        dt = s["dt"] if s["dt"] is not None else s["dt_multiple"] * g.dxi
        t_end = s["t_end"] if s["t_end"] is not None else s["n_steps"] * dt
        try:
            cfg = SolverConfig(
                model=model or self["model"]["name"],
                dt=dt,
                t_end=t_end,
                scheme=s["scheme"],
                cfl_safety=s["cfl_safety"],
                params=self.model_params(),
                conservative=s["conservative"],
            )
            cfg.check_grid(g)
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}") from None
        return cfg

    def symbol(self) -> SymbolParams:
        s = self["symbol"]
        try:
            return SymbolParams(s["delta"], s["epsilon"], s["exponent_p"])
        except ValueError as exc:
            raise ConfigError(f"[symbol] {exc}") from None


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {sec: dict(keys) for sec, keys in SCHEMA.items()}
    explicit = set()
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
            values[sec][key] = _convert(sec, key, raw, SCHEMA[sec][key])
            explicit.add((sec, key))
    _validate(values)
    return RunConfig(values, source, frozenset(explicit))


def _validate(v: dict) -> None:
    if v["model"]["name"] not in ("toy", "landau"):
        raise ConfigError(f"[model] name must be toy or landau, got {v['model']['name']!r}")
    if v["initial"]["family"] not in INITIAL_FAMILIES and v["initial"]["path"] is None:
        raise ConfigError(f"[initial] family must be one of {INITIAL_FAMILIES}")
    if v["experiment"]["perturbation"] not in ("initial", "resolution", "dt"):
        raise ConfigError("[experiment] perturbation must be initial, resolution or dt")
    for key in ("delta", "epsilon"):
        x = v["symbol"][key]
        if not (isinstance(x, float) and x > 0 and math.isfinite(x)):
            raise ConfigError(f"[symbol] {key} must be a positive number")


def load_config(path) -> RunConfig:
    if path is None:
        return parse_config("", "<defaults>")
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    except UnicodeDecodeError:
        raise ConfigError(f"config {p} is not text") from None
    return parse_config(text, str(p))
