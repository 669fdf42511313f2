"""Command-line entry point.

    mkinetic verify        property suites -> verify.csv
    mkinetic solve-toy     toy-model trajectory -> diagnostics.csv, density.csv, snapshots
    mkinetic solve-landau  viscous Landau trajectory, same outputs
    mkinetic twin          twin-run stability experiment -> report.csv, report.txt
    mkinetic report        render PNG figures next to the CSVs in --out

Exit status: 0 success, 1 scientific failure (failed check, solver abort),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config

log = logging.getLogger("mkinetic")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_SEED = 20240601
DENSITY_ROWS = 64  # density.csv keeps about this many time rows


class UsageError(Exception):
    pass


def _header(cfg: RunConfig, seed: int) -> list[str]:
    return [f"config_sha256={cfg.sha256}", f"seed={seed}", f"mkinetic={__version__}"]


def _prepare_out(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory {out} is not writable: {exc}") from None
    return out


def _write_csv(path: Path, header_lines, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        w.writerows(rows)


def _num(x) -> str:
    return repr(float(x))


def _write_text(path: Path, header_lines, lines) -> None:
    path.write_text("".join(f"# {h}\n" for h in header_lines) + "\n".join(lines) + "\n")


# -- verify ------------------------------------------------------------------

def cmd_verify(cfg: RunConfig, out: Path, seed: int) -> int:
    from . import suites

    rng = np.random.default_rng(seed)
    v = cfg["verify"]
    sym = cfg.symbol()
    results = []
    results += suites.symbol_suite(rng, sym, v["symbol_samples"], v["bound_samples"])
    results += suites.dyadic_suite(rng, v["partition_samples"])
    results += suites.spectral_suite(rng)
    results += suites.landau_suite(rng, v["landau_n_v"], cfg["grid"]["l_v"], v["landau_fields"])
    _write_csv(out / "verify.csv", _header(cfg, seed), ["check", "measured", "bound", "status", "note"],
               [r.row() for r in results])
    failed = [r.name for r in results if not r.ok]
    for r in results:
        log.info("%-34s %-8s measured=%s bound=%s %s", r.name, r.status, r.row()[1], r.row()[2], r.note)
    if failed:
        log.error("failed checks: %s", ", ".join(failed))
        return EXIT_FAIL
    return EXIT_OK


# -- solve -------------------------------------------------------------------

def _initial_field(cfg: RunConfig):
    from .solver import make_initial
    from .spectral import read_snapshot

    ini = cfg["initial"]
    g = cfg.grid()
    if ini["path"]:
        try:
            f = read_snapshot(ini["path"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"[initial] path: {exc}") from None
        if f.grid != g:
            raise ConfigError(f"[initial] snapshot grid {f.grid.describe()} differs from [grid] {g.describe()}")
        return f
    return make_initial(ini["family"], g, rho=ini["rho"], amplitude=ini["amplitude"], mode=ini["mode"],
                        temperature=ini["temperature"], drift=ini["drift"])


def cmd_solve(cfg: RunConfig, out: Path, seed: int, model: str) -> int:
    from .solver import run, validate_initial
    from .spectral import write_density_csv

    scfg = cfg.solver(model)
    f0 = _initial_field(cfg)
    header = _header(cfg, seed)
    report = validate_initial(f0, scfg.params, model)
    _write_text(out / "initial_checks.txt", header, [report.summary()])
    if model == "toy" and not report.passed:
        log.error("initial data fails the toy-model conditions: %s", report.summary())
        return EXIT_FAIL
    t0 = time.perf_counter()
    keep = max(1, scfg.n_steps // DENSITY_ROWS)
    traj = run(f0, scfg, keep_every=keep, out_dir=out, snapshot_every=cfg["solver"]["snapshot_every"],
               header_lines=header, validate=False)
    elapsed = time.perf_counter() - t0
    g = f0.grid
    write_density_csv(out / "density.csv", [s.time for s in traj.snapshots],
                      [s.values.sum(axis=g.v_axes) * g.dv3 for s in traj.snapshots], g, header)
    snaps = sorted(p.name for p in out.glob("snap_*.mkin"))
    manifest = {
        "config_sha256": cfg.sha256,
        "seed": seed,
        "version": __version__,
        "model": model,
        "grid": g.describe(),
        "dt": scfg.dt,
        "t_end": scfg.t_end,
        "snapshots": snaps,
        "aborted": traj.aborted,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    lines = [
        f"model={model} steps={len(traj.diagnostics) - 1} runtime_s={elapsed:.2f}",
        f"mass_drift={traj.mass_drift():.3e}",
        f"min_f={traj.series('min_f').min():.3e}",
    ]
    if model == "landau":
        lines.append(f"momentum_drift={traj.momentum_drift():.3e}")
        lines.append(f"energy_ledger_error={traj.energy_ledger_error():.3e}")
    else:
        v = traj.first_rho_violation
        lines.append("rho_lower_bound=ok" if v is None else f"rho_lower_bound_violated_at={v:.4g}")
    if traj.aborted:
        lines.append(f"ABORTED: {traj.abort_reason}")
    _write_text(out / "summary.txt", header, lines)
    for line in lines:
        log.info(line)
    return EXIT_FAIL if traj.aborted else EXIT_OK


# -- twin --------------------------------------------------------------------

def _experiment(cfg: RunConfig):
    from .harness import ExperimentConfig

    for key in ("delta", "epsilon"):
        if not cfg.is_set("symbol", key):
            raise ConfigError(f"twin experiments need [symbol] {key} set explicitly")
    e = cfg["experiment"]
    ini = cfg["initial"]
    try:
        return ExperimentConfig(
            base_run=cfg.solver(),
            grid=cfg.grid(),
            perturbation=e["perturbation"],
            magnitude=e["magnitude"],
            symbol=cfg.symbol(),
            ring_beta=cfg["symbol"]["ring_beta"],
            T0=e["T0"],
            mollifier_radii=tuple(e["mollifier_radii"]),
            ring_m=e["ring_m"],
            initial=ini["family"],
            initial_rho=ini["rho"],
            initial_amplitude=ini["amplitude"],
        )
    except ValueError as exc:
        raise ConfigError(f"[experiment] {exc}") from None


def cmd_twin(cfg: RunConfig, out: Path, seed: int) -> int:
    from . import harness, suites

    ecfg = _experiment(cfg)
    header = _header(cfg, seed)
    rep = harness.twin_run(ecfg)
    e = rep.weighted_energy
    _write_csv(out / "report.csv", header, ["t", "distance"], [[_num(t), _num(d)] for t, d in rep.rows()])

    verdict = dict(rep.verdict)
    lines = [
        f"perturbation={ecfg.perturbation} magnitude={ecfg.magnitude:g}",
        f"sup_distance={rep.sup_distance:.6e}",
        f"base_energy={e.base:.6e}",
        f"dissipation={e.dissipation:.6e} bound={e.bound:.6e}",
        f"ring_lhs={e.ring_lhs:.6e} ring_dissipation={e.ring_dissipation:.6e} ring_bound={e.ring_bound:.6e}",
    ]
    for k, val in rep.ledgers.items():
        if k != "sup_distance":
            lines.append(f"{k}={val}")
    if rep.epsilon_a_series is not None:
        s = rep.epsilon_a_series
        _write_csv(out / "mollifier.csv", header, ["a", "eps_rho", "eps_phase"],
                   [[_num(a), _num(r), _num(p)] for a, r, p in zip(s.radii, s.eps_rho, s.eps_phase)])
        verdict["mollifier_decreasing"] = s.decreasing()

    ex = cfg["experiment"]
    rng = np.random.default_rng(seed)
    checks, com = suites.commutator_suite(rng, ex["commutator_delta"], ex["commutator_T"], ex["commutator_xi0"])
    _write_csv(out / "commutator.csv", header, ["T", "commutator", "m_norm", "ratio"],
               [[_num(a), _num(b), _num(c), _num(d)] for a, b, c, d in zip(com.T, com.norms, com.m_norms, com.ratios)])
    lines.append(f"commutator_raw_slope={com.slope:.4f}")
    lines.append(f"commutator_normalized_slope={com.normalized_slope:.4f}")
    verdict["commutator_ratio_bounded"] = bool(np.all(np.isfinite(com.ratios)) and com.ratios.max() / com.ratios.min() <= 10)

    if ex["sweep"]:
        mags, sups, slope, _ = harness.stability_sweep(ecfg, ex["magnitudes"])
        _write_csv(out / "stability.csv", header, ["delta0", "sup_distance"],
                   [[_num(a), _num(b)] for a, b in zip(mags, sups)])
        lines.append(f"stability_slope={slope:.4f}")
        verdict["stability_slope"] = bool(0.85 <= slope <= 1.15)
    if ecfg.perturbation == "dt":
        dts = [k * ecfg.grid.dxi for k in ex["dt_multiples"]]
        dts, dists, slope = harness.dt_convergence(ecfg, dts)
        _write_csv(out / "dt_convergence.csv", header, ["dt", "distance"],
                   [[_num(a), _num(b)] for a, b in zip(dts, dists)])
        lines.append(f"dt_slope={slope:.4f}")
        verdict["dt_slope"] = bool(slope >= 1.9)

    lines.append("")
    for k, ok in verdict.items():
        lines.append(f"{'PASS' if ok else 'FAIL'} {k}")
    _write_text(out / "report.txt", header, lines)
    for line in filter(None, lines):
        log.info(line)
    return EXIT_OK if all(verdict.values()) else EXIT_FAIL


# -- report ------------------------------------------------------------------

def cmd_report(out: Path) -> int:
    from .plotting import render_directory

    if not out.is_dir():
        raise UsageError(f"{out} is not a directory")
    paths = render_directory(out)
    if not paths:
        raise UsageError(f"no known CSV outputs under {out}")
    for p in paths:
        log.info("wrote %s", p)
    return EXIT_OK


# -- entry -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mkinetic", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("verify", "solve-toy", "solve-landau", "twin", "report"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, default=None, help="INI file; defaults apply when omitted")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for randomized checks")
        sp.add_argument("--log", default="INFO", help="log level")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    level = getattr(logging, str(args.log).upper(), None)
    if not isinstance(level, int):
        print(f"mkinetic: unknown log level {args.log!r}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args.out)
        cfg = load_config(args.config)
        out = _prepare_out(args.out)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.seed)
        if args.command == "solve-toy":
            return cmd_solve(cfg, out, args.seed, "toy")
        if args.command == "solve-landau":
            return cmd_solve(cfg, out, args.seed, "landau")
        return cmd_twin(cfg, out, args.seed)
    except (ConfigError, UsageError) as exc:
        print(f"mkinetic: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
