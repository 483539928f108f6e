import csv
import json
from pathlib import Path

import pytest

from bridgefloer.cli import main
from bridgefloer.config import ConfigError, load_config, override_grid
from bridgefloer.scenarios import SCENARIOS, scenario

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_SYMBOL = """\
name = "tiny-scan"
pipeline = "symbol-scan"

[symbol]
max_m = 4
xi_min = -1.0
xi_max = 1.0
xi_step = 0.1
oracle_xi_step = 0.5
"""


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.name)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.name == path.stem


def test_unknown_key_reports_line(tmp_path):
    p = write(tmp_path, 'name = "x"\npipeline = "solutions"\n\n[grid]\nn1 = 16\nnn2 = 16\n')
    with pytest.raises(ConfigError, match=r"c\.toml:6: \[grid\] nn2: unknown key"):
        load_config(p)


@pytest.mark.parametrize("text, needle", [
    ('bogus = 1\n', "bogus: unknown key"),
    ('[grid]\nn1 = 15\n', "even"),
    ('[grid]\nn1 = "64"\n', "expected integer"),
    ('[potential]\nname = "cosine"\ncoeffs = [1]\n', "unknown key for potential"),
    ('[potential]\nname = "quartic"\n', "unknown potential"),
    ('pipeline = "nope"\n', "unknown pipeline"),
    ('[hamiltonian]\nrho = -1\n', "rho must be positive"),
    ('[legendre]\nlagrangian = "x"\n', "unknown Lagrangian"),
    ('[flow]\ndealias = 1\n', "expected boolean"),
    ('[grid\n', "c.toml"),
])
def test_invalid_configs(tmp_path, text, needle):
    with pytest.raises(ConfigError, match=needle.replace(".", r"\.")):
        load_config(write(tmp_path, text))


def test_roundtrip_to_dict(tmp_path):
    cfg = load_config(CONFIGS / "energy-bound.toml")
    d = cfg.to_dict()
    assert d["homotopy"]["eps"] == [0.05, 0.1, 0.2] and d["potential"] == {"name": "cosine", "eps": 0.1}


def test_grid_override():
    cfg = override_grid(scenario("cuplength-d1"), "32x16")
    assert (cfg.grid.n1, cfg.grid.n2) == (32, 16)
    assert SCENARIOS["cuplength-d1"].grid.n1 == 64
    for bad in ("32", "7x8", "axb"):
        with pytest.raises(ConfigError):
            override_grid(cfg, bad)


def test_cli_symbol_scan_and_report(tmp_path, capsys):
    cfg = write(tmp_path, SMALL_SYMBOL)
    out = tmp_path / "out"
    assert main(["symbol-scan", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["N"] == 1
    rows = list(csv.DictReader(open(out / "symbol_scan.csv")))
    assert len(rows) == 81
    assert main(["report", str(out)]) == 0
    assert "PASS  finite_N" in capsys.readouterr().out


def test_cli_seed_reproducible(tmp_path):
    text = SMALL_SYMBOL.replace("symbol-scan", "legendre-check").replace("tiny-scan", "tiny-leg")
    text = text.split("[symbol]")[0] + '[grid]\nn1 = 16\nn2 = 16\n[legendre]\nfields = 2\nsamples = 50\n'
    cfg = write(tmp_path, text)
    outs = [tmp_path / f"o{k}" for k in range(3)]
    for o, seed in zip(outs, (7, 7, 8)):
        assert main(["legendre-check", "--config", str(cfg), "--seed", str(seed), "--out", str(o)]) == 0
    a, b, c = ((o / "legendre.csv").read_text() for o in outs)
    assert a == b and a != c
    assert (outs[0] / "summary.json").read_text() == (outs[1] / "summary.json").read_text()


def test_cli_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, 'bogus = 1\n', "bad.toml")
    assert main(["symbol-scan", "--config", str(bad)]) == 2
    mismatch = write(tmp_path, SMALL_SYMBOL, "m.toml")
    assert main(["solve", "--config", str(mismatch)]) == 2
    assert main(["symbol-scan", "--config", str(mismatch), "--seed", "-1"]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["report", str(tmp_path / "missing")]) == 1


def test_cli_failing_check_exits_one(tmp_path):
    out = tmp_path / "o"
    cfg = write(tmp_path, SMALL_SYMBOL)
    assert main(["symbol-scan", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    summary["checks"]["finite_N"]["passed"] = False
    summary["passed"] = False
    (out / "summary.json").write_text(json.dumps(summary))
    assert main(["report", str(out)]) == 1
