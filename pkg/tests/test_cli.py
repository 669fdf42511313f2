import json
import os
import subprocess
import sys

import pytest

from mkinetic.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from mkinetic.spectral import read_snapshot

BASE = """
[grid]
n_x = 8
n_v = 32
[initial]
rho = 0.05
[solver]
n_steps = 4
snapshot_every = 2
[verify]
symbol_samples = 500
bound_samples = 50
partition_samples = 500
landau_n_v = 16
landau_fields = 2
"""


@pytest.fixture
def ini(tmp_path):
    def make(extra=""):
        p = tmp_path / "run.ini"
        p.write_text(BASE + extra)
        return str(p)

    return make


def header(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_sha256=") and len(lines[0]) == len("# config_sha256=") + 64
    assert lines[1].startswith("# seed=")
    return lines


def test_solve_toy(tmp_path, ini):
    out = tmp_path / "toy"
    assert main(["solve-toy", "--config", ini(), "--out", str(out), "--seed", "9", "--log", "WARNING"]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 9
    assert manifest["snapshots"] == ["snap_00000.mkin", "snap_00002.mkin", "snap_00004.mkin"]
    assert read_snapshot(out / "snap_00004.mkin").time == pytest.approx(manifest["t_end"])
    lines = header(out / "diagnostics.csv")
    assert lines[1] == "# seed=9"
    assert len(header(out / "density.csv")) == 3 + 1 + 5
    assert "rho_lower_bound=ok" in (out / "summary.txt").read_text()


def test_solve_toy_rejects_bad_initial_data(tmp_path, ini):
    out = tmp_path / "bad"
    assert main(["solve-toy", "--config", ini("[model]\nc0 = 0.5\n"), "--out", str(out), "--log", "ERROR"]) == EXIT_FAIL
    assert "rho_lower" in (out / "initial_checks.txt").read_text()


def test_solve_landau(tmp_path, ini):
    out = tmp_path / "lan"
    cfg = ini("[model]\nnu = 0.002\n")
    text = open(cfg).read().replace("n_x = 8", "n_x = 2").replace("n_steps = 4", "n_steps = 1")
    open(cfg, "w").write(text)
    assert main(["solve-landau", "--config", cfg, "--out", str(out), "--log", "WARNING"]) == EXIT_OK
    summary = (out / "summary.txt").read_text()
    assert "momentum_drift" in summary and "energy_ledger_error" in summary


def test_verify_reports_underresolved_landau(tmp_path, ini):
    out = tmp_path / "ver"
    # n_v = 16 is too coarse for the Poisson residual tolerance
    assert main(["verify", "--config", ini(), "--out", str(out), "--log", "CRITICAL"]) == EXIT_FAIL
    lines = header(out / "verify.csv")
    assert lines[3] == "check,measured,bound,status,note"
    body = "\n".join(lines)
    assert "partition_sum,2.22" in body or "partition_sum,0.0" in body
    assert ",fail," in body


def test_verify_skips_bound_for_noncanonical_exponent(tmp_path, ini):
    out = tmp_path / "ver"
    main(["verify", "--config", ini("[symbol]\nexponent_p = 2.0\n"), "--out", str(out), "--log", "CRITICAL"])
    row = [line for line in (out / "verify.csv").read_text().splitlines() if line.startswith("int_xi_M2_bound")]
    assert row and ",skipped," in row[0]


def test_twin_requires_symbol(tmp_path, ini, capsys):
    assert main(["twin", "--config", ini(), "--out", str(tmp_path / "tw")]) == EXIT_USAGE
    assert "[symbol] delta" in capsys.readouterr().err


def test_twin_and_report(tmp_path, ini):
    out = tmp_path / "tw"
    extra = "[symbol]\ndelta = 1\nepsilon = 0.5\n[experiment]\nmagnitude = 1e-3\n"
    assert main(["twin", "--config", ini(extra), "--out", str(out), "--log", "WARNING"]) == EXIT_OK
    report = (out / "report.txt").read_text()
    for key in ("PASS lapl_inequality", "PASS ring_inequality", "PASS commutator_ratio_bounded",
                "commutator_raw_slope=", "commutator_normalized_slope="):
        assert key in report
    assert len(header(out / "report.csv")) == 3 + 1 + 5
    header(out / "commutator.csv")
    assert main(["report", "--out", str(tmp_path), "--log", "WARNING"]) == EXIT_OK
    assert (out / "report.png").exists() and (out / "commutator.png").exists()


def test_usage_errors(tmp_path, ini):
    assert main([]) == EXIT_USAGE
    assert main(["launch"]) == EXIT_USAGE
    assert main(["verify", "--config", str(tmp_path / "nope.ini")]) == EXIT_USAGE
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nn_x = 3\n")
    assert main(["solve-toy", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert main(["verify", "--log", "LOUD"]) == EXIT_USAGE
    assert main(["report", "--out", str(tmp_path / "missing")]) == EXIT_USAGE
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", "--out", str(empty)]) == EXIT_USAGE
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["solve-toy", "--config", ini(), "--out", str(blocker / "sub")]) == EXIT_USAGE


def test_module_entry_point():
    env = dict(os.environ)
    r = subprocess.run([sys.executable, "-m", "mkinetic", "--version"], capture_output=True, text=True, env=env)
    assert r.returncode == 0
    assert r.stdout.startswith("mkinetic ")
