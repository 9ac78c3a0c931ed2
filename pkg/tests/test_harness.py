import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandit_newton import cli
from bandit_newton.config import ExperimentConfig
from bandit_newton.errors import ConfigError
from bandit_newton.experiment import run_experiment, rounded_set, sweep


def small_config(tmp_path, **kw):
    data = {
        "body": {"kind": "ball", "d": 2},
        "loss": {"loss": "quadratic", "center": [0.3, -0.2], "noise": {"kind": "gaussian", "std": 0.1}},
        "mode": "stochastic",
        "n": 60,
        "replicas": 2,
        "seed": 7,
        "out": str(tmp_path / "out"),
    }
    data.update(kw)
    return ExperimentConfig.from_dict(data)


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = small_config(tmp_path, overrides={"η": 0.01, "lambda": 0.2})
        assert cfg.overrides == {"eta": 0.01, "lam": 0.2}
        again = ExperimentConfig.from_json(cfg.to_json())
        assert again.to_json() == cfg.to_json()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 10 ** 6), st.integers(1, 20), st.sampled_from(["stochastic", "adversarial"]),
           st.floats(1e-4, 0.5))
    def test_round_trip_property(self, n, replicas, mode, delta):
        cfg = ExperimentConfig({"kind": "ball", "d": 3}, {"loss": "quadratic"}, mode, n, delta,
                               replicas=replicas)
        assert ExperimentConfig.from_json(cfg.to_json()).to_json() == cfg.to_json()

    def test_dotted_override(self, tmp_path):
        cfg = small_config(tmp_path).with_override("loss.noise.std", "0.2").with_override("n", "80")
        assert cfg.loss["noise"]["std"] == 0.2 and cfg.n == 80
        assert cfg.with_override("eta", 0.03).constants().eta == 0.03

    @pytest.mark.parametrize("bad", [
        {"mode": "bayesian"}, {"n": -1}, {"replicas": 0}, {"overrides": {"lam": 2.0}},
        {"overrides": {"zeta": 1.0}}, {"colour": "red"},
    ])
    def test_invalid(self, tmp_path, bad):
        with pytest.raises(ConfigError):
            small_config(tmp_path, **bad)

    def test_invalid_json(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json("[1, 2]")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.load(tmp_path / "missing.json")


class TestExperiment:
    def test_replicas_are_reproducible(self, tmp_path):
        cfg = small_config(tmp_path)
        first = run_experiment(cfg, tmp_path / "a")
        second = run_experiment(cfg, tmp_path / "b")
        for i in range(2):
            name = f"replica_{i:03d}.csv"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert first["mean_final_regret"] == second["mean_final_regret"]
        a0 = (tmp_path / "a" / "replica_000.csv").read_bytes()
        a1 = (tmp_path / "a" / "replica_001.csv").read_bytes()
        assert a0 != a1
        summary = json.loads((tmp_path / "a" / "summary.json").read_text())
        assert summary["replicas"] == 2 and "mean_reg_over_sqrt_n" in summary

    def test_empty_horizon(self, tmp_path):
        summary = run_experiment(small_config(tmp_path, n=0), tmp_path / "z")
        assert summary["mean_final_regret"] == 0.0
        rows = list(csv.reader(open(tmp_path / "z" / "replica_000.csv")))
        assert len(rows) == 1

    def test_adversarial_switch(self, tmp_path):
        cfg = small_config(tmp_path, mode="adversarial", n=80, replicas=1,
                           loss={"loss": "quadratic", "schedule": {"kind": "switch"}})
        summary = run_experiment(cfg, tmp_path / "adv")
        rec = summary["per_replica"][0]
        assert rec["rounds"] == 80 and rec["fault"] is None
        assert rec["max_bonus_count"] >= 1

    def test_lovasz_records_sets(self, tmp_path):
        cfg = small_config(tmp_path, body={"kind": "box", "lo": [0, 0, 0], "hi": [1, 1, 1]}, replicas=1, n=30,
                           loss={"loss": "lovasz-cut", "edges": [[0, 1, 0.5]], "unary": [-1, 0.5, 0.2]},
                           positioning={"kind": "affine", "T": (2 * np.eye(3)).tolist(), "c": [0.5] * 3})
        rec = run_experiment(cfg, tmp_path / "lov")["per_replica"][0]
        assert rec["min_set"] == [0] and rec["min_value"] == pytest.approx(-0.5)  # unary -1 plus the cut 0.5
        assert set(rec["rounded_set"]) <= {0, 1, 2}

    def test_rounding(self):
        assert rounded_set([0.7, 0.2, 0.5]) == frozenset({0, 2})


class TestSweep:
    def test_over_n(self, tmp_path):
        rows = sweep(small_config(tmp_path, replicas=1), "n", [20, 40], tmp_path / "s")
        assert [r["value"] for r in rows] == [20, 40]
        lines = (tmp_path / "s" / "sweep.csv").read_text().splitlines()
        assert lines[0] == "value,mean_regret,reg_over_sqrt_n,restarts,runtime_s" and len(lines) == 3

    def test_empty(self, tmp_path):
        assert sweep(small_config(tmp_path), "n", [], tmp_path / "e") == []
        assert (tmp_path / "e" / "sweep.csv").read_text().strip() == "value,mean_regret,reg_over_sqrt_n,restarts,runtime_s"

    def test_over_d(self, tmp_path):
        cfg = small_config(tmp_path, replicas=1, loss={"loss": "quadratic"})
        rows = sweep(cfg, "d", [1, 2, 4], tmp_path / "d")
        assert len(rows) == 3

    def test_bad_axis(self, tmp_path):
        with pytest.raises(ConfigError):
            sweep(small_config(tmp_path), "colour", [1], tmp_path / "x")


class TestCli:
    def write(self, tmp_path, cfg):
        path = tmp_path / "cfg.json"
        path.write_text(cfg.to_json())
        return str(path)

    def test_run(self, tmp_path, capsys):
        path = self.write(tmp_path, small_config(tmp_path))
        assert cli.main(["run", "--config", path, "--override", "n=30", "--out", str(tmp_path / "r")]) == 0
        assert "mean final regret" in capsys.readouterr().out
        assert (tmp_path / "r" / "summary.json").exists()

    def test_sweep(self, tmp_path):
        path = self.write(tmp_path, small_config(tmp_path, replicas=1))
        assert cli.main(["sweep", "--config", path, "--axis", "n", "--values", "10,20",
                         "--out", str(tmp_path / "s")]) == 0

    def test_config_error(self, tmp_path, capsys):
        path = self.write(tmp_path, small_config(tmp_path))
        assert cli.main(["run", "--config", path, "--override", "mode=bayesian"]) == 2
        assert cli.main(["run", "--config", str(tmp_path / "nope.json")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_diag(self, capsys):
        assert cli.main(["diag", "gauge", "--seed", "1"]) == 0
        assert capsys.readouterr().out.startswith("PASS gauge")
