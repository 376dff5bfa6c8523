import json
import os

import numpy as np
import pytest

from tiltedlines.experiments import (EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK,
                                     ConfigError, ExperimentConfig,
                                     config_to_text, parse_config_text,
                                     report, run_experiment)


class TestConfigFormat:
    def test_roundtrip(self):
        cfg = ExperimentConfig(kind="scaling", n=3, t_half=5.0, seed=11,
                               eps_list=[0.05, 0.1], t_list=[2.0, 4.0])
        again = parse_config_text(config_to_text(cfg))
        assert again == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("kind = sample\nbogus_key = 1\n")

    def test_lambda_validation_message(self):
        with pytest.raises(ConfigError, match="lambda must exceed 1"):
            parse_config_text("kind = sample\nlam = 0.5\n")

    def test_comments_and_blanks(self):
        cfg = parse_config_text("# experiment\nkind = fs-reference\n\nseed = 3\n")
        assert cfg.kind == "fs-reference" and cfg.seed == 3

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("kind = sample\nkind = scaling\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("kind = sample\nnonsense\n")


class TestRunners:
    def test_fs_reference(self, tmp_path):
        cfg = ExperimentConfig(kind="fs-reference", seed=1)
        res = run_experiment(cfg, str(tmp_path / "o"), threads=1)
        assert res["exit_code"] == EXIT_OK
        text = open(res["results_csv"]).read()
        assert "airy" in text and "fs" in text
        params = json.load(open(tmp_path / "o" / "params.json"))
        assert params["config"]["kind"] == "fs-reference"
        rep = report(str(tmp_path / "o"))
        assert rep["passed"] and rep["exit_code"] == EXIT_OK
        assert any("0.3550280539" in line for line in rep["lines"])

    def test_sample_writes_state_artifacts(self, tmp_path):
        cfg = ExperimentConfig(kind="sample", n=2, t_half=1.0, dt=0.1,
                               n_samples=50, thin=2, burn_in=100,
                               n_chains=1, seed=2)
        res = run_experiment(cfg, str(tmp_path / "o"))
        assert res["exit_code"] == EXIT_OK
        assert os.path.exists(tmp_path / "o" / "state_chain0.csv")
        assert os.path.exists(tmp_path / "o" / "state_chain0.ck")

    def test_determinism_same_seed(self, tmp_path):
        cfg = ExperimentConfig(kind="upper-tail", process="fs",
                               n_samples=50000, seed=7)
        r1 = run_experiment(cfg, str(tmp_path / "a"))
        r2 = run_experiment(cfg, str(tmp_path / "b"))
        b1 = open(r1["results_csv"], "rb").read()
        b2 = open(r2["results_csv"], "rb").read()
        assert b1 == b2

    def test_thread_count_invariance(self, tmp_path):
        cfg = ExperimentConfig(kind="free-vs-zero", n=1, t_half=1.0, dt=0.1,
                               n_samples=400, thin=2, burn_in=200,
                               t_list=[1.0, 2.0], seed=3)
        r1 = run_experiment(cfg, str(tmp_path / "a"), threads=1)
        r2 = run_experiment(cfg, str(tmp_path / "b"), threads=2)
        assert (open(r1["results_csv"], "rb").read()
                == open(r2["results_csv"], "rb").read())

    def test_seed_changes_results(self, tmp_path):
        base = dict(kind="upper-tail", process="fs", n_samples=20000)
        r1 = run_experiment(ExperimentConfig(**base, seed=1), str(tmp_path / "a"))
        r2 = run_experiment(ExperimentConfig(**base, seed=2), str(tmp_path / "b"))
        assert (open(r1["results_csv"], "rb").read()
                != open(r2["results_csv"], "rb").read())


class TestReport:
    def test_missing_artifacts(self, tmp_path):
        rep = report(str(tmp_path / "nothing"))
        assert rep["exit_code"] == EXIT_CONFIG
        assert "missing artifacts" in rep["lines"][0]

    def test_scaling_report_pass(self, tmp_path):
        cfg = ExperimentConfig(kind="scaling", n=1, t_half=2.0, dt=0.1,
                               n_samples=1500, thin=5, burn_in=500, seed=9)
        run_experiment(cfg, str(tmp_path / "o"))
        rep = report(str(tmp_path / "o"))
        assert rep["passed"]
        assert any("KS p" in line for line in rep["lines"])

    def test_failing_target_exit_code(self, tmp_path):
        # an upper-tail fit on deliberately wrong-scaled samples must FAIL
        out = str(tmp_path / "o")
        os.makedirs(out)
        with open(os.path.join(out, "params.json"), "w") as f:
            json.dump({"config": {"kind": "upper-tail", "seed": 0}}, f)
        with open(os.path.join(out, "results.csv"), "w") as f:
            f.write("process,c_hat,se,r2,window_lo,window_hi,n_points,target,c_inf\n")
            f.write("fs,0.5,0.01,0.99,1.5,2.5,9,0.9428090415820634,1.885\n")
        rep = report(out)
        assert not rep["passed"] and rep["exit_code"] == EXIT_ACCEPTANCE
