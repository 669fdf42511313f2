import numpy as np
import pytest
from PIL import Image

from mkinetic import plotting


def write(path, header, rows, comments=("config_sha256=abc", "seed=7")):
    lines = [f"# {c}" for c in comments] + [",".join(header)]
    lines += [",".join(str(x) for x in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_read_table(tmp_path):
    p = write(tmp_path / "t.csv", ["check", "measured"], [["a", 1.5], ["b", 2.0]])
    comments, cols, header = plotting.read_table(p)
    assert comments == ["config_sha256=abc", "seed=7"]
    assert header == ["check", "measured"]
    assert cols["check"] == ["a", "b"]
    np.testing.assert_array_equal(cols["measured"], [1.5, 2.0])


def test_render_directory(tmp_path):
    t = np.linspace(0, 1, 5)
    write(tmp_path / "diagnostics.csv", ["t", "mass", "px", "py", "pz", "energy", "min_f", "rho_min", "wsup_k0"],
          [[ti, 1.0, 0, 0, 0, 3 + ti, 0, 0.5, 1e-3] for ti in t])
    write(tmp_path / "density.csv", ["t", "rho_0", "rho_1"], [[ti, 1.0, 1.1] for ti in t])
    sub = tmp_path / "twin"
    sub.mkdir()
    write(sub / "report.csv", ["t", "distance"], [[ti, 0.0] for ti in t])
    write(sub / "stability.csv", ["delta0", "sup_distance"], [[1e-2, 1e-3], [1e-3, 1e-4], [1e-4, 1e-5]])
    write(sub / "commutator.csv", ["T", "commutator", "m_norm", "ratio"], [[0.01, 1e-3, 1, 0.1], [0.02, 2e-3, 1, 0.1]])
    write(sub / "mollifier.csv", ["a", "eps_rho", "eps_phase"], [[1.0, 1e-2, 1e-1], [0.5, 1e-3, 1e-2]])
    write(tmp_path / "verify.csv", ["check", "measured", "bound", "status", "note"],
          [["x", 1, 2, "pass", ""], ["y", 3, 2, "fail", ""], ["z", "nan", 1, "skipped", ""]])
    paths = plotting.render_directory(tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["commutator.png", "density.png", "diagnostics.png", "mollifier.png", "report.png",
                     "stability.png", "verify.png"]
    for p in paths:
        assert p.exists() and p.stat().st_size > 1000
    img = Image.open(sub / "report.png")
    assert "seed=7" in img.info["Description"]


def test_render_empty(tmp_path):
    assert plotting.render_directory(tmp_path) == []


def test_bad_table(tmp_path):
    p = write(tmp_path / "report.csv", ["t", "dist"], [[0, 1]])
    with pytest.raises(KeyError):
        plotting.plot_distance(p)
