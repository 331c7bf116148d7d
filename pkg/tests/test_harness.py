import json
import math
import subprocess
import sys

import numpy as np
import pytest

from wavechaos import harness
from wavechaos.cli import main

Ls = [4, 8, 16, 32]


def test_fit_slope_exact_power():
    fit = harness.fit_slope(Ls, [L**-0.5 for L in Ls])
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.stderr <= 1e-12
    assert harness.fit_slope(Ls, [3.0] * 4).slope == pytest.approx(0.0, abs=1e-12)


def test_fit_slope_noisy_interval_covers():
    rng = np.random.default_rng(0)
    y = [2 * L**-1 * math.exp(0.05 * rng.standard_normal()) for L in Ls * 3]
    fit = harness.fit_slope(Ls * 3, y)
    assert abs(fit.slope + 1) <= fit.half_width
    assert fit.half_width > 0


def test_fit_slope_exclusions():
    with pytest.warns(RuntimeWarning):
        fit = harness.fit_slope([4, 8, 16, 32, 64], [1.0, 0.0, 0.25, 0.125, 0.0625])
    assert fit.excluded == 1 and fit.used == 4
    assert fit.slope == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        with pytest.warns(RuntimeWarning):
            harness.fit_slope([4, 8, 16], [1.0, 0.0, 0.25])


def test_fit_slope_csv(tmp_path):
    p = tmp_path / "r.csv"
    harness.write_csv(p, ["L", "residual"], [[L, L**-1.0] for L in Ls], comment="seed=0")
    assert harness.fit_slope_csv(p).slope == pytest.approx(-1.0)
    assert main(["fit-slope", str(p)]) == 0
    assert main(["fit-slope", str(p), "--y", "missing"]) == 2


def test_build_config_validation():
    cfg = harness.build_config("trees", {"n": 4})
    assert cfg["n"] == 4 and cfg["N"] == 2
    with pytest.raises(harness.ConfigError, match="trees.bogus"):
        harness.build_config("trees", {"bogus": 1})
    with pytest.raises(harness.ConfigError):
        harness.build_config("trees", {"n": "four"})
    assert harness.parse_override("xis=[[0.5],[-0.25]]") == ("xis", [[0.5], [-0.25]])
    assert harness.parse_override("profile=unit-1d") == ("profile", "unit-1d")
    with pytest.raises(harness.ConfigError):
        harness.parse_override("novalue")


def test_trees_cli(tmp_path, capsys):
    out = tmp_path / "t"
    assert main(["trees", "N=2", "n=6", "--out", str(out)]) == 0
    lines = (out / "trees.csv").read_text().splitlines()
    assert len(lines) == 133
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["constants"]["count"] == 132
    assert "trees: ok" in capsys.readouterr().out


def test_unknown_key_exits_2(tmp_path, capsys):
    assert main(["trees", "size=3", "--out", str(tmp_path)]) == 2
    assert "size" in capsys.readouterr().err


def test_budget_exit(tmp_path):
    assert main(["trees", "n=8", "cap=10", "--out", str(tmp_path)]) == 3
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "budget-exceeded"


def test_acceptance_exit(tmp_path):
    assert main(["slope", "L_values=[4,8,16]", "expected_slope=0.5", "--out", str(tmp_path)]) == 4
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "acceptance-failure"


def test_theorem2_abort_exit(tmp_path):
    code = main(["theorem2", "eps0=0.9", "samples=100", "L_values=[4]", "--out", str(tmp_path)])
    assert code == 4
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["status"] == "aborted" and m["constants"]["diagnostics"]["eps0"] == 0.9


def test_slope_run_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["slope", "L_values=[4,8,16]", "--seed", "3", "--out", str(out)]) == 0
    assert (a / "slope.csv").read_bytes() == (b / "slope.csv").read_bytes()
    m = json.loads((a / "manifest.json").read_text())
    assert m["seed"] == 3 and "slope" in m["constants"] and m["wall_time_s"] >= 0
    assert (a / "slope.csv").read_text().startswith("# seed=3\n")


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"N": 3, "n": 3}))
    assert main(["pairings", "--config", str(cfg), "orders=[1,1]", "--out", str(tmp_path / "o")]) == 2
    assert main(["trees", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "trees.csv").read_text().splitlines()) == 13


def test_tails_cli_small(tmp_path):
    assert main(["tails", "samples=2000", "--out", str(tmp_path)]) in (0, 4)
    rows = (tmp_path / "tails.csv").read_text().splitlines()
    assert rows[0] == "# seed=0" and rows[1] == "R,probability,exceedances"


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "wavechaos.cli", "trees", "n=2", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "trees: ok" in r.stdout
