import math

import pytest

from mkinetic.config import SCHEMA, ConfigError, load_config, parse_config


def test_defaults():
    cfg = load_config(None)
    assert cfg.source == "<defaults>"
    assert cfg["grid"] == SCHEMA["grid"]
    g = cfg.grid()
    s = cfg.solver()
    assert s.dt == pytest.approx(g.dxi)
    assert s.n_steps == 16
    assert cfg.symbol().p == 1.0
    assert not cfg.is_set("symbol", "delta")


def test_typed_values_and_explicit_keys():
    text = """
[grid]
n_x = 8
l_v = 6
[solver]
dt_multiple = 2
t_end = 6.283185307179586
scheme = lie
conservative = no
[symbol]
delta = 2
epsilon = 0.25
[experiment]
magnitudes = 1e-2, 1e-3
sweep = yes
"""
    cfg = parse_config(text)
    assert cfg["grid"]["n_x"] == 8 and cfg["grid"]["l_v"] == 6.0
    s = cfg.solver()
    assert s.dt == pytest.approx(2 * math.pi / 6)
    assert s.n_steps == 6
    assert s.scheme == "lie" and s.conservative is False
    assert cfg["experiment"]["magnitudes"] == (1e-2, 1e-3)
    assert cfg["experiment"]["sweep"] is True
    assert cfg.is_set("symbol", "delta") and cfg.is_set("symbol", "epsilon")
    assert cfg.symbol().dissipation_bound() == pytest.approx(4.0)


def test_hash_is_stable_and_content_sensitive():
    a = parse_config("[grid]\nn_x = 8\n")
    b = parse_config("[grid]\n\nn_x=8\n")
    c = parse_config("[grid]\nn_x = 16\n")
    assert a.sha256 == b.sha256
    assert a.sha256 != c.sha256
    assert len(a.sha256) == 64


@pytest.mark.parametrize(
    "text",
    [
        "[grids]\nn_x = 8\n",
        "[grid]\nnx = 8\n",
        "[grid]\nn_x = eight\n",
        "[model]\nname = boltzmann\n",
        "[initial]\nfamily = plasma\n",
        "[experiment]\nperturbation = noise\n",
        "[symbol]\ndelta = 0\n",
        "[symbol]\nepsilon = -1\n",
        "no section header\n",
    ],
)
def test_rejects_bad_text(text):
    with pytest.raises(ConfigError):
        parse_config(text)


@pytest.mark.parametrize(
    "text,view",
    [
        ("[grid]\nn_x = 12\n", "grid"),
        ("[model]\nm = 2\n", "model_params"),
        ("[solver]\ndt = 0.3\n", "solver"),
        ("[solver]\nscheme = rk4\n", "solver"),
        ("[symbol]\nexponent_p = -1\n", "symbol"),
    ],
)
def test_rejects_inconsistent_values(text, view):
    cfg = parse_config(text)
    with pytest.raises(ConfigError):
        getattr(cfg, view)()


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")
    binary = tmp_path / "bin.ini"
    binary.write_bytes(b"\xff\xfe\x00\x81")
    with pytest.raises(ConfigError):
        load_config(binary)
    good = tmp_path / "ok.ini"
    good.write_text("[grid]\nn_v = 16\n")
    assert load_config(good).grid().n_v == 16
