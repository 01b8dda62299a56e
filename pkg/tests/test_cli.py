"""Tests for the command-line interface."""

import csv
import json
import math
import subprocess
import sys

import pytest

from fracgreen import cli


def run_cli(*args):
    """Invoke main() in-process, capturing stdout/stderr."""
    import contextlib
    import io

    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli.main(list(args))
    return code, out.getvalue(), err.getvalue()


class TestGreen:
    def test_oracle_value(self):
        code, out, _ = run_cli(
            "green", "--kernel", "gaussian", "--d", "1", "--beta", "0.5",
            "--t", "1", "--x", "0", "--y", "0",
        )
        assert code == 0
        assert float(out.strip()) == pytest.approx(0.40803, abs=1e-5)

    def test_json_format(self):
        code, out, _ = run_cli(
            "green", "--kernel", "gaussian", "--d", "1", "--beta", "0.5",
            "--t", "1", "--x", "0.5", "--y", "0", "--format", "json",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["rows"][0]["value"] > 0
        assert payload["config"]["subcommand"] == "green"

    def test_domain_error_exit_1(self):
        code, _, err = run_cli("green", "--beta", "2.5", "--t", "1")
        assert code == 1
        record = json.loads(err)
        assert record["error"] == "DomainError"


class TestEnvelope:
    def test_thm32_value(self):
        code, out, _ = run_cli(
            "envelope", "--theorem", "3.2", "--d", "1", "--alpha", "1",
            "--beta", "0.5", "--t", "1", "--r", "2",
        )
        assert code == 0
        assert float(out.strip()) == pytest.approx(0.25, rel=1e-12)

    def test_thm31_branch(self):
        code, out, _ = run_cli(
            "envelope", "--theorem", "3.1", "--d", "3", "--beta", "0.5",
            "--t", "1", "--r", "0.5",
        )
        assert code == 0
        assert float(out.strip()) == pytest.approx(2.0, rel=1e-12)


class TestSpecfunKernel:
    def test_specfun_table(self, tmp_path):
        out_path = tmp_path / "sf.csv"
        code, _, _ = run_cli(
            "specfun", "--beta", "0.5", "--x", "1.0", "--lam", "1.0",
            "--out", str(out_path),
        )
        assert code == 0
        rows = list(csv.DictReader(out_path.read_text().splitlines()))
        byq = {(r["quantity"], r["argument"]): float(r["value"]) for r in rows}
        assert byq[("w_beta", "1.0")] == pytest.approx(0.2196956, abs=1e-6)
        assert byq[("E_beta", "-1.0")] == pytest.approx(0.4275836, abs=1e-6)

    def test_kernel_table(self):
        code, out, _ = run_cli(
            "kernel", "--kernel", "stable", "--d", "1", "--alpha", "1",
            "--t", "1", "--r", "0",
        )
        assert code == 0
        rows = list(csv.DictReader(out.splitlines()))
        assert float(rows[0]["value"]) == pytest.approx(1 / math.pi, rel=1e-8)


class TestConfigMerge:
    def test_flags_win_over_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"beta": 0.3, "t": 1.0, "x": [0.0], "y": [0.0], "kernel": "gaussian", "d": 1}))
        code, out, _ = run_cli("green", "--config", str(cfg), "--beta", "0.5", "--t", "1")
        assert code == 0
        assert float(out.strip()) == pytest.approx(0.40803, abs=1e-5)

    def test_config_supplies_params(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"x": [0.0], "y": [0.0], "kernel": "gaussian", "d": 1}))
        code, out, _ = run_cli("green", "--config", str(cfg), "--beta", "0.5", "--t", "1")
        assert code == 0
        assert float(out.strip()) == pytest.approx(0.40803, abs=1e-5)

    def test_config_echoed_in_artifact(self, tmp_path):
        out_path = tmp_path / "g.json"
        code, _, _ = run_cli(
            "green", "--kernel", "gaussian", "--d", "1", "--beta", "0.5",
            "--t", "1", "--format", "json", "--out", str(out_path),
        )
        assert code == 0
        payload = json.loads(out_path.read_text())
        assert payload["config"]["params"]["beta"] == 0.5


class TestVerifyCommand:
    def test_report_files_and_exit(self, tmp_path):
        out_path = tmp_path / "rep.json"
        code, out, _ = run_cli(
            "verify", "--theorem", "3.2", "--d", "1", "--alpha", "1.5",
            "--beta", "0.5", "--out", str(out_path),
        )
        assert code == 0
        report = json.loads(out_path.read_text())
        assert report["passed"] is True
        csv_lines = (tmp_path / "rep.csv").read_text().strip().splitlines()
        assert len(csv_lines) - 1 == len(report["points"])

    def test_roundtrip_identity(self, tmp_path):
        out_path = tmp_path / "rep.json"
        run_cli(
            "verify", "--theorem", "3.2", "--d", "1", "--alpha", "1.5",
            "--beta", "0.5", "--out", str(out_path),
        )
        from fracgreen import harness as H

        text = out_path.read_text()
        assert H.report_to_json(H.report_from_json(text)) == text


class TestLaplaceCheck:
    def test_csv_columns(self, tmp_path):
        out_path = tmp_path / "lap.csv"
        code, _, _ = run_cli(
            "laplace-check", "--a", "1", "--N", "0", "--c", "1",
            "--omega", "100", "1000", "--out", str(out_path),
        )
        assert code == 0
        lines = out_path.read_text().strip().splitlines()
        assert lines[0] == "a,N,c,Omega,log_oracle,log_asymptotic,log_ratio"
        assert len(lines) == 3


class TestMcCommand:
    def test_seed_determinism(self, tmp_path):
        outs = []
        for _ in range(2):
            code, out, _ = run_cli(
                "mc", "--campaign", "inverse", "--beta", "0.5", "--t", "1",
                "--n", "2000", "--seed", "123",
            )
            assert code == 0
            outs.append(out)
        assert outs[0] == outs[1]

    def test_seed_changes_output(self):
        _, out1, _ = run_cli("mc", "--campaign", "inverse", "--beta", "0.5", "--t", "1", "--n", "2000", "--seed", "1")
        _, out2, _ = run_cli("mc", "--campaign", "inverse", "--beta", "0.5", "--t", "1", "--n", "2000", "--seed", "2")
        assert json.loads(out1)["mean"] != json.loads(out2)["mean"]

    def test_histogram_emission(self, tmp_path):
        out_path = tmp_path / "hist.csv"
        code, _, _ = run_cli(
            "mc", "--campaign", "increment", "--beta", "0.5", "--t", "1",
            "--n", "5000", "--seed", "9", "--bins", "20", "--out", str(out_path),
        )
        assert code == 0
        lines = out_path.read_text().strip().splitlines()
        assert lines[0] == "bin_left,bin_right,count,density"
        assert len(lines) == 21
        summary = json.loads((tmp_path / "hist_summary.json").read_text())
        assert summary["mean_exp"] == pytest.approx(math.exp(-1.0), abs=0.05)


class TestExitCodes:
    def test_usage_error_is_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "fracgreen.cli", "green", "--beta"],
            capture_output=True,
        )
        assert proc.returncode == 2

    def test_unknown_subcommand_is_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "fracgreen.cli", "bogus"],
            capture_output=True,
        )
        assert proc.returncode == 2
