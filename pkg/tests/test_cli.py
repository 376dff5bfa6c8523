import os
import subprocess
import sys

import pytest

from tiltedlines.cli import main


def _write_cfg(tmp_path, text):
    p = tmp_path / "exp.cfg"
    p.write_text(text)
    return str(p)


class TestCLI:
    def test_run_and_report(self, tmp_path, capsys):
        cfg = _write_cfg(tmp_path, "kind = fs-reference\nseed = 2\n")
        out = str(tmp_path / "out")
        rc = main(["run", "--config", cfg, "--output", out])
        assert rc == 0
        assert os.path.exists(os.path.join(out, "results.csv"))
        rc = main(["report", out])
        assert rc == 0
        assert "PASS" in capsys.readouterr().out

    def test_config_error_exit_2(self, tmp_path):
        cfg = _write_cfg(tmp_path, "kind = fs-reference\nlam = 0.5\n")
        rc = main(["run", "--config", cfg, "--output", str(tmp_path / "o")])
        assert rc == 2

    def test_missing_config_file_exit_2(self, tmp_path):
        rc = main(["run", "--config", str(tmp_path / "nope.cfg"),
                   "--output", str(tmp_path / "o")])
        assert rc == 2

    def test_report_missing_dir_exit_2(self, tmp_path):
        rc = main(["report", str(tmp_path / "missing")])
        assert rc == 2

    def test_seed_override_changes_output(self, tmp_path):
        cfg = _write_cfg(tmp_path,
                         "kind = upper-tail\nprocess = fs\nn_samples = 20000\nseed = 1\n")
        a, b, c = (str(tmp_path / d) for d in "abc")
        assert main(["run", "--config", cfg, "--output", a]) == 0
        assert main(["run", "--config", cfg, "--output", b, "--seed", "5"]) == 0
        assert main(["run", "--config", cfg, "--output", c]) == 0
        ra = open(os.path.join(a, "results.csv"), "rb").read()
        rb = open(os.path.join(b, "results.csv"), "rb").read()
        rc_ = open(os.path.join(c, "results.csv"), "rb").read()
        assert ra != rb and ra == rc_

    def test_console_entrypoint(self, tmp_path):
        cfg = _write_cfg(tmp_path, "kind = fs-reference\nseed = 2\n")
        proc = subprocess.run(
            [sys.executable, "-m", "tiltedlines.cli", "run", "--config", cfg,
             "--output", str(tmp_path / "o")],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
