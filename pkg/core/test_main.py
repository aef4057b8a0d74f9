"""Tests for core/main.py (the command line).

Covers:
  - sample: CSV on stdout, summary files, missing / invalid model parameters
  - bounds: CSV curves and domain errors
  - genie / relay / run: output files, hop records, channel dumps, config-file merging, size limits
  - verify: exit codes and JSON report with a stubbed suite
  - argparse errors and exit codes
"""

import argparse
import json

import numpy as np
import pytest

from core import __version__
from core.common.errors import ConfigError
from core.main import build_parser, main, model_params
from core.models.channel import ChannelMatrix, LinkParams
from core.services import acceptance, genie


def _json_out(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------

class TestSample:
    def test_csv_to_stdout(self, capsys):
        assert main(["sample", "--model", "rayleigh", "--n-samples", "5", "--seed", "1"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "index,gain"
        assert len(lines) == 6

    def test_deterministic(self, capsys):
        main(["sample", "--model", "lognormal", "--n-samples", "20", "--seed", "3"])
        first = capsys.readouterr().out
        main(["sample", "--model", "lognormal", "--n-samples", "20", "--seed", "3"])
        assert capsys.readouterr().out == first

    def test_extremal_summary(self, tmp_path):
        code = main(["sample", "--model", "extremal", "--pop", "10", "--n-samples", "2000", "--seed", "2", "--out", str(tmp_path)])
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["maxima"] == 200
        assert 0.0 <= summary["exceed_extreme_mean"] <= 1.0
        assert summary["moments"]["mean"] == 1.0
        assert (tmp_path / "samples.csv").exists()

    def test_pareto_summary(self, tmp_path):
        main(["sample", "--model", "pareto_pathloss", "--alpha", "4", "--n-samples", "5000", "--seed", "2", "--out", str(tmp_path)])
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["tail_ratio"] > 0
        assert summary["ratio_sum_to_max"] >= 1.0

    def test_missing_parameter(self, capsys):
        assert main(["sample", "--model", "pareto_pathloss", "--seed", "1"]) == 2
        assert "--alpha" in capsys.readouterr().err

    def test_negative_support_refused(self, capsys):
        assert main(["sample", "--model", "extremal", "--mu", "0", "--pop", "10", "--seed", "1"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_random_seed_printed(self, capsys):
        main(["sample", "--model", "rayleigh", "--n-samples", "2"])
        assert "seed=" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

class TestBounds:
    def test_scalar_curve(self, capsys):
        assert main(["bounds", "--bound", "feige_lower", "--grid", "0.05,1"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "delta,bound_value,raw,kind"
        assert len(lines) == 3

    def test_sinr_curve(self, capsys):
        assert main(["bounds", "--bound", "sinr_success_upper", "--grid", "4,64"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "m,bound_value,raw,kind"
        assert lines[1].startswith("4.0,1.0,")

    def test_sinr_domain_error(self, capsys):
        assert main(["bounds", "--bound", "sinr_success_upper", "--grid", "2"]) == 2
        assert "too small" in capsys.readouterr().err

    def test_existence_needs_n(self):
        assert main(["bounds", "--bound", "genie_existence_upper", "--grid", "64"]) == 2

    def test_existence_prints_knee(self, capsys, tmp_path):
        args = ["bounds", "--bound", "genie_existence_upper", "--grid", "64,128", "--n", "1000", "--out", str(tmp_path)]
        assert main(args) == 0
        assert "knee m=" in capsys.readouterr().err
        assert (tmp_path / "genie_existence_upper.csv").read_text().startswith("m,bound_value,raw,kind")


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

class TestGenie:
    def test_writes_artifacts(self, tmp_path):
        assert main(["genie", "--n", "3,4,5", "--trials", "3", "--seed", "4", "--out", str(tmp_path)]) == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert set(summary["m_star_distribution"]) == {"3", "4", "5"}
        assert sum(summary["m_star_distribution"]["4"].values()) == 3
        assert manifest["artifact_version"] == __version__
        assert manifest["base_seed"] == 4
        assert (tmp_path / "results.csv").read_text().startswith("n,")
        records = json.loads((tmp_path / "results.json").read_text())
        assert [(r["n"], r["trial_index"]) for r in records][:3] == [(3, 0), (3, 1), (3, 2)]
        assert all(r["extra"]["witness_verified"] == 1.0 for r in records)
        assert not (tmp_path / "hops.csv").exists()

    def test_dumped_channel_reproduces_trial_zero(self, tmp_path):
        out, channels = tmp_path / "out", tmp_path / "channels"
        args = ["genie", "--n", "3,4", "--trials", "2", "--seed", "4", "--out", str(out), "--dump-channel", str(channels)]
        assert main(args) == 0
        records = json.loads((out / "results.json").read_text())
        for n in (3, 4):
            gains = np.loadtxt(channels / f"channel_n{n}_trial0.csv", delimiter=",", ndmin=2)
            assert gains.shape == (n, n)
            found = genie.max_valid_single_hop(ChannelMatrix(gains), LinkParams(rho=10.0, beta0=1.0))
            trial0 = next(r for r in records if r["n"] == n and r["trial_index"] == 0)
            assert found.m_star == trial0["m"]

    def test_size_limit(self, capsys, monkeypatch):
        monkeypatch.delenv("SCALING_LAB_GENIE_SINGLE_LIMIT", raising=False)
        assert main(["genie", "--n", "20", "--trials", "1", "--seed", "1"]) == 2
        assert "force_exponential" in capsys.readouterr().err

    def test_two_hop_rejects_low_threshold(self):
        assert main(["genie", "--mode", "two-hop", "--n", "3", "--beta0", "0.5", "--seed", "1"]) == 2


class TestRelay:
    def test_summary_on_stdout(self, capsys):
        assert main(["relay", "--n-grid", "16,32,64", "--trials", "3", "--seed", "2"]) == 0
        payload = _json_out(capsys)
        assert payload["scheme"] == "opportunistic_two_hop"
        assert [s["n"] for s in payload["summaries"]] == [16, 32, 64]
        assert [s["m"] for s in payload["summaries"]] == [3, 4, 6]

    def test_pareto_linear(self, capsys):
        args = ["relay", "--scheme", "pareto-linear", "--model", "pareto_pathloss", "--alpha", "4",
                "--n-grid", "16,32,64", "--trials", "2", "--seed", "2"]
        assert main(args) == 0
        payload = _json_out(capsys)
        assert payload["scheme"] == "pareto_linear"
        assert [s["m"] for s in payload["summaries"]] == [16, 32, 64]

    def test_same_seed_same_results(self, tmp_path):
        for name in ("a", "b"):
            main(["relay", "--n-grid", "16,32", "--trials", "3", "--seed", "9", "--out", str(tmp_path / name)])
        assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()
        assert (tmp_path / "a" / "hops.csv").read_bytes() == (tmp_path / "b" / "hops.csv").read_bytes()

    def test_hop_records(self, tmp_path):
        assert main(["relay", "--n-grid", "16,32", "--trials", "3", "--seed", "9", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "hops.csv").read_text().splitlines()
        assert lines[0] == "n,trial,hop,m,distinct_event,successes,throughput_bits"
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 2 * 2 * 3
        assert [row[2] for row in rows[:2]] == ["1", "2"]
        assert {row[4] for row in rows} <= {"0", "1"}
        records = json.loads((tmp_path / "results.json").read_text())
        first_hop = [row for row in rows if row[2] == "1"]
        for row, record in zip(first_hop, records):
            assert int(row[5]) == record["extra"]["first_hop_successes"]
            assert float(row[6]) == record["extra"]["first_hop_bits"]

    def test_config_file_model_kept(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"model": {"family": "rayleigh", "params": {"mu": 1}}, "n_grid": [16, 32], "trials": 2}))
        assert main(["relay", "--config", str(config), "--seed", "1", "--out", str(tmp_path / "out")]) == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["model"]["family"] == "rayleigh"
        assert manifest["config"]["n_grid"] == [16, 32]

    def test_explicit_model_overrides_file(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"model": {"family": "rayleigh", "params": {"mu": 1}}, "n_grid": [16, 32], "trials": 2}))
        main(["relay", "--config", str(config), "--model", "nakagami", "--shape", "2", "--seed", "1", "--out", str(tmp_path / "out")])
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["model"]["family"] == "nakagami"


class TestRun:
    def test_from_config(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "scheme": "distribution_diagnostics",
            "model": {"family": "extremal", "params": {"mu": 1, "sigma": 1, "n": 16}},
            "n_grid": [16, 32, 64],
            "trials": 4,
            "base_seed": 5,
        }))
        assert main(["run", "--config", str(config)]) == 0
        payload = _json_out(capsys)
        assert payload["scheme"] == "distribution_diagnostics"
        assert payload["base_seed"] == 5
        assert [row["n"] for row in payload["diversity_gain"]] == [16, 32, 64]
        assert all(row["mean_max"] > 1.0 for row in payload["diversity_gain"])

    def test_grid_override(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"scheme": "genie_single", "model": {"family": "rayleigh", "params": {"mu": 1}}, "n_grid": [2], "trials": 2}))
        assert main(["run", "--config", str(config), "--n-grid", "3,4", "--seed", "1"]) == 0
        payload = _json_out(capsys)
        assert [s["n"] for s in payload["summaries"]] == [3, 4]
        assert "m_star_distribution" in payload

    def test_missing_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2

    def test_invalid_json(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text("{not json")
        assert main(["run", "--config", str(config)]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_invalid_config_lists_fields(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"scheme": "genie_single", "model": {"family": "rayleigh", "params": {"mu": 1}}, "n_grid": [4, 2]}))
        assert main(["run", "--config", str(config), "--seed", "1"]) == 2
        assert "n_grid" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _stub_check(passed: bool, gating: bool = True):
    def check(profile, rng, **_):
        return acceptance.CheckResult(number=0, name="stub", passed=passed, gating=gating, detail="stub")
    return check


class TestVerify:
    def test_pass(self, monkeypatch, tmp_path, capsys):
        monkeypatch.setattr(acceptance, "CHECKS", (_stub_check(True), _stub_check(False, gating=False)))
        report = tmp_path / "report.json"
        assert main(["verify", "--quick", "--json", str(report)]) == 0
        payload = json.loads(report.read_text())
        assert payload["passed"] is True
        assert payload["profile"] == "quick"
        assert payload["base_seed"] == acceptance.DEFAULT_VERIFY_SEED
        assert "all checks passed" in capsys.readouterr().out

    def test_default_profile_is_full(self, monkeypatch, tmp_path):
        monkeypatch.delenv("SCALING_LAB_PROFILE", raising=False)
        monkeypatch.setattr(acceptance, "CHECKS", (_stub_check(True),))
        report = tmp_path / "report.json"
        assert main(["verify", "--json", str(report)]) == 0
        payload = json.loads(report.read_text())
        assert payload["profile"] == "full"
        assert payload["reduced"] is False

    def test_quick_is_reduced(self, monkeypatch, tmp_path):
        monkeypatch.setattr(acceptance, "CHECKS", (_stub_check(True),))
        report = tmp_path / "report.json"
        assert main(["verify", "--quick", "--json", str(report)]) == 0
        assert json.loads(report.read_text())["reduced"] is True

    def test_failure_exit_code(self, monkeypatch, capsys):
        monkeypatch.setattr(acceptance, "CHECKS", (_stub_check(False),))
        assert main(["verify", "--quick"]) == 1
        assert "acceptance checks failed" in capsys.readouterr().err

    def test_only(self, monkeypatch, tmp_path):
        monkeypatch.setattr(acceptance, "CHECKS", (_stub_check(False), _stub_check(True)))
        report = tmp_path / "report.json"
        assert main(["verify", "--quick", "--only", "2", "--json", str(report)]) == 0
        assert len(json.loads(report.read_text())["checks"]) == 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class TestParser:
    def test_bad_list(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["relay", "--n-grid", "a,b"])
        assert excinfo.value.code == 2

    def test_missing_command(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_model_defaults(self):
        args = build_parser().parse_args(["relay"])
        assert args.model == "extremal"
        assert args.model_given is False
        assert model_params(args) == {"mu": 1.0, "sigma": 1.0, "n": 100.0}

    def test_model_given_flag(self):
        args = build_parser().parse_args(["relay", "--model", "rayleigh", "--mu", "2"])
        assert args.model_given is True
        assert model_params(args) == {"mu": 2.0}

    def test_model_params_missing(self):
        with pytest.raises(ConfigError) as excinfo:
            model_params(argparse.Namespace(model="pareto_pathloss"))
        assert excinfo.value.fields == ("model",)
