import json
import math
import subprocess
import sys

import numpy as np
import pytest

from adaptive_martingale import io
from adaptive_martingale.cli import main


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def read_prices(path):
    return io.ensemble_from_csv(path.read_text(), 0, "price")


class TestSimulate:
    def test_zero_vol_identical_paths(self, tmp_path):
        code, out = run(tmp_path, "simulate", "--set", "market.alpha=0.0", "--n-paths", "5")
        assert code == 0
        v = read_prices(out / "prices.csv").values
        assert np.all(v == v[0])

    def test_byte_identical_reruns(self, tmp_path):
        args = ("simulate", "--n-paths", "50", "--seed", "4", "--policy", "constant_mix(0.5)")
        _, a = run(tmp_path, *args, name="a")
        _, b = run(tmp_path, *args, name="b")
        names = sorted(p.name for p in a.iterdir())
        assert "strategy.csv" in names and "gain.json" in names and "financing_defect.csv" in names
        for n in names:
            assert (a / n).read_bytes() == (b / n).read_bytes()

    def test_exact_vs_euler(self, tmp_path):
        common = ("simulate", "--n-paths", "2000", "--set", "grid.n_steps=256", "--format", "csv")
        _, ex = run(tmp_path, *common, name="exact")
        _, eu = run(tmp_path, *common, "--scheme", "euler", name="euler")
        gap = read_prices(ex / "prices.csv").terminal - read_prices(eu / "prices.csv").terminal
        assert math.sqrt(np.mean(gap**2)) < 0.01 * 100.0
        assert not (ex / "prices.json").exists()

    def test_euler_positivity_exit(self, tmp_path):
        code, _ = run(
            tmp_path, "simulate", "--scheme", "euler", "--set", "market.alpha=4.0",
            "--set", "grid.n_steps=1", "--n-paths", "500",
        )
        assert code == 4


class TestPrice:
    def test_zero_strike(self, tmp_path, capsys):
        code, out = run(tmp_path, "price", "--strike", "0")
        assert code == 0
        quote = json.loads((out / "quote.json").read_text())
        assert quote == {"price": 100.0, "std_error": 0.0, "n_paths": 0, "method": "closed"}
        assert json.loads(capsys.readouterr().out) == quote

    def test_mc_matches_closed(self, tmp_path):
        run(tmp_path, "price", "--strike", "100", name="c")
        run(tmp_path, "price", "--strike", "100", "--method", "mc", "--n-paths", "100000", name="m")
        closed = json.loads((tmp_path / "c" / "quote.json").read_text())
        mc = json.loads((tmp_path / "m" / "quote.json").read_text())
        assert mc["n_paths"] == 100000
        assert abs(mc["price"] - closed["price"]) <= 3 * mc["std_error"]

    def test_malformed_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("market.x0 = 100.0\nmarket.mu = fast\n")
        code, _ = run(tmp_path, "price", "--config", str(cfg))
        assert code == 2
        assert "line 2" in capsys.readouterr().err

    def test_invalid_field(self, tmp_path, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("market.x0 = 100.0\n\nmarket.alpha = -0.5\n")
        code, _ = run(tmp_path, "price", "--config", str(cfg))
        assert code == 2
        err = capsys.readouterr().err
        assert "line 3" in err and "alpha" in err

    def test_missing_config_is_io_error(self, tmp_path):
        code, _ = run(tmp_path, "price", "--config", str(tmp_path / "nope.toml"))
        assert code == 3

    def test_config_not_mutated(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text("market.x0 = 100.0\n")
        before = cfg.read_bytes()
        run(tmp_path, "price", "--config", str(cfg), "--seed", "3")
        assert cfg.read_bytes() == before


class TestDefect:
    def test_defect_outputs(self, tmp_path):
        code, out = run(tmp_path, "defect", "--set", "market.mu=0.05", "--n-paths", "20000")
        assert code == 0
        rep = json.loads((out / "defect.json").read_text())
        assert rep["iterations"] == 0 and rep["converged"]
        assert (out / "defect_by_index.csv").read_text().startswith("index,time,defect\n")

    def test_condition_on_strategy(self, tmp_path):
        code, _ = run(
            tmp_path, "defect", "--policy", "threshold(100)", "--n-paths", "5000",
            "--set", "estimator.condition_on_strategy=true",
        )
        assert code == 0
        code, _ = run(
            tmp_path, "defect", "--n-paths", "100",
            "--set", "estimator.condition_on_strategy=true", name="nopolicy",
        )
        assert code == 2


OPT = ("optimize", "--set", "grid.T=2.0", "--set", "grid.n_steps=2", "--n-paths", "100000")


class TestOptimize:
    def test_risk_neutral(self, tmp_path):
        code, out = run(tmp_path, *OPT, "--set", "market.mu=0.05")
        assert code == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["converged"] and rep["iterations"] <= 3

    def test_girsanov(self, tmp_path):
        code, out = run(tmp_path, *OPT, "--set", "market.mu=0.10")
        assert code == 0
        rep = json.loads((out / "report.json").read_text())
        assert abs(rep["theta_history"][-1] - 0.25) <= 0.05
        rows = (out / "report_iterations.csv").read_text().splitlines()
        assert rows[0] == "iter,theta,max_defect" and len(rows) == 1 + rep["iterations"]

    def test_exhausted(self, tmp_path):
        code, out = run(tmp_path, *OPT, "--set", "market.mu=0.5", "--set", "optimizer.max_iter=1")
        assert code == 5
        assert json.loads((out / "report.json").read_text())["converged"] is False

    def test_degenerate(self, tmp_path):
        code, _ = run(tmp_path, "optimize", "--set", "market.alpha=0.0")
        assert code == 6

    def test_raw_requires_zero_drift_when_flat(self, tmp_path):
        code, _ = run(tmp_path, "optimize", "--raw", "--set", "market.alpha=0.0", "--set", "market.mu=0.0")
        assert code == 0


def test_entry_point_subprocess(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "adaptive_martingale.cli", "price", "--strike", "0", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["price"] == 100.0


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["price", "--bogus"])
    assert info.value.code == 2
