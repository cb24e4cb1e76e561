"""End-to-end command pipeline: exit codes, files, byte determinism."""

import json
import math

import pytest

from renewbound.bounds import BoundCertificate, BoundParams, assemble_certificate
from renewbound.cli import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_USAGE,
    run_command,
)
from renewbound import dist
from renewbound.dist import UniformComponent

UNIFORM_CFG = {
    "distribution": {"kind": "uniform", "a": 1.0, "b": 2.0},
    "component": {"c": 1.5, "L": 0.5, "eta_tilde": 0.9},
    "params": {"beta": 1.0, "delta": 0.5, "theta": 7e-3},
    "simulation": {
        "replicas": 400,
        "seed": 5,
        "x": [2.0],
        "t_grid": {"values": [2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 20.0, 26.0]},
        "n_traces": 2,
    },
    "verify": {"replicas": 500, "seed": 5, "x": [2.0], "t_count": 6},
}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class TestUsageAndConfigErrors:
    def test_unknown_command_is_usage(self, capsys):
        assert run_command(["frobnicate"]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_command_is_usage(self, capsys):
        assert run_command([]) == EXIT_USAGE

    def test_missing_config_file(self, tmp_path, capsys):
        code = run_command(
            ["bound", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]
        )
        assert code == EXIT_CONFIG

    def test_malformed_json_reports_position(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"distribution": }')
        code = run_command(["bound", "--config", str(path), "--out", str(tmp_path)])
        assert code == EXIT_CONFIG
        assert "line" in capsys.readouterr().err

    def test_missing_required_block(self, tmp_path, capsys):
        cfg = {"distribution": {"kind": "uniform", "a": 1.0, "b": 2.0}}
        code = run_command(
            ["bound", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]
        )
        assert code == EXIT_CONFIG

    def test_missing_distribution_field(self, tmp_path, capsys):
        cfg = dict(UNIFORM_CFG, distribution={"kind": "exponential"})
        code = run_command(
            ["bound", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]
        )
        assert code == EXIT_CONFIG
        assert "rate" in capsys.readouterr().err


class TestBound:
    def test_writes_matching_certificate(self, tmp_path):
        out = tmp_path / "run"
        code = run_command(
            ["bound", "--config", write_cfg(tmp_path, UNIFORM_CFG), "--out", str(out)]
        )
        assert code == EXIT_OK
        cert = BoundCertificate.from_json((out / "certificate.json").read_text())
        model = dist.uniform(1.0, 2.0)
        comp = UniformComponent(1.5, 0.5, 0.9)
        params = BoundParams(1.0, 0.5, 7e-3)
        assert cert == assemble_certificate(model, comp, params)
        summary = read_json(out / "summary.json")
        assert summary["command"] == "bound"
        assert summary["certificate"]["valid"] is True

    def test_infeasible_parameters_exit_two(self, tmp_path):
        cfg = dict(UNIFORM_CFG, params={"beta": 1.0, "delta": 0.5, "theta": 0.9})
        out = tmp_path / "run"
        code = run_command(
            ["bound", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]
        )
        assert code == EXIT_INFEASIBLE
        cert = read_json(out / "certificate.json")
        assert cert["valid"] is False


class TestOptimize:
    def cfg(self):
        return {
            "distribution": {"kind": "uniform", "a": 1.0, "b": 2.0},
            "component": {"c": 1.5, "L": 0.5, "eta_tilde": 0.9},
            "search": {
                "beta_range": [0.5, 1.5],
                "delta_range": [0.1, 0.9],
                "theta_range": [1e-3, 0.5],
                "n_beta": 5,
                "n_delta": 4,
                "n_theta": 4,
                "budget": 300,
            },
        }

    def test_produces_grid_and_certificate(self, tmp_path):
        out = tmp_path / "opt"
        code = run_command(
            ["optimize", "--config", write_cfg(tmp_path, self.cfg()), "--out", str(out)]
        )
        assert code == EXIT_OK
        grid = (out / "gridpoints.csv").read_text().splitlines()
        assert grid[0] == "beta,delta,theta,c,L,eta_tilde,q,rate"
        assert len(grid) == 1 + 5 * 4 * 4
        cert = BoundCertificate.from_json((out / "certificate.json").read_text())
        assert cert.valid
        summary = read_json(out / "summary.json")
        assert summary["result"]["feasible"] is True
        assert summary["n_gridpoints"] == 80

    def test_infeasible_search_exits_two(self, tmp_path):
        cfg = self.cfg()
        cfg["search"].update(theta_range=[1.0, 1.0], n_theta=1)
        out = tmp_path / "opt"
        code = run_command(
            ["optimize", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]
        )
        assert code == EXIT_INFEASIBLE
        assert (out / "gridpoints.csv").exists()
        assert not (out / "certificate.json").exists()


class TestSimulate:
    def test_writes_tail_rows_under_the_bound_columns(self, tmp_path):
        out = tmp_path / "simrun"
        code = run_command(
            ["simulate", "--config", write_cfg(tmp_path, UNIFORM_CFG), "--out", str(out)]
        )
        assert code == EXIT_OK
        lines = (out / "tail.csv").read_text().splitlines()
        assert lines[0] == "x,t,survival,stderr,bound"
        assert len(lines) == 1 + 8  # one x value, eight grid times
        model = dist.uniform(1.0, 2.0)
        cert = assemble_certificate(
            model, UniformComponent(1.5, 0.5, 0.9), BoundParams(1.0, 0.5, 7e-3)
        )
        for row in lines[1:]:
            x, t, surv, se, bound = (float(v) for v in row.split(","))
            assert bound == cert.tail_bound(x, t)
            assert 0.0 <= surv <= 1.0
        summary = read_json(out / "summary.json")
        assert summary["command"] == "simulate"

    def test_certificate_fallback_from_outdir(self, tmp_path):
        # an optimize/bound step leaves certificate.json; simulate without a
        # params block picks it up
        out = tmp_path / "chain"
        cfg_bound = write_cfg(tmp_path, UNIFORM_CFG, "bound.json")
        assert run_command(["bound", "--config", cfg_bound, "--out", str(out)]) == 0
        cfg = {k: v for k, v in UNIFORM_CFG.items() if k != "params"}
        code = run_command(
            ["simulate", "--config", write_cfg(tmp_path, cfg, "sim.json"), "--out", str(out)]
        )
        assert code == EXIT_OK
        assert (out / "tail.csv").exists()

    def test_missing_certificate_everywhere_is_config_error(self, tmp_path):
        cfg = {k: v for k, v in UNIFORM_CFG.items() if k != "params"}
        out = tmp_path / "empty"
        code = run_command(
            ["simulate", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]
        )
        assert code == EXIT_CONFIG


class TestReport:
    def test_fits_rates_per_start_gap(self, tmp_path):
        out = tmp_path / "rep"
        cfg = write_cfg(tmp_path, UNIFORM_CFG)
        assert run_command(["bound", "--config", cfg, "--out", str(out)]) == 0
        assert run_command(["simulate", "--config", cfg, "--out", str(out)]) == 0
        code = run_command(["report", "--out", str(out)])
        assert code == EXIT_OK
        report = read_json(out / "report.json")
        assert report["certified_rate"] == pytest.approx(1.0 * 0.5 * 7e-3)
        assert report["empirical_rate"] > report["certified_rate"]
        curves = (out / "curves.csv").read_text().splitlines()
        assert curves[0] == "x,t,survival,stderr,bound,fit"
        assert len(curves) == 1 + 8

    def test_without_simulation_is_config_error(self, tmp_path):
        out = tmp_path / "rep2"
        cfg = write_cfg(tmp_path, UNIFORM_CFG)
        assert run_command(["bound", "--config", cfg, "--out", str(out)]) == 0
        assert run_command(["report", "--out", str(out)]) == EXIT_CONFIG


class TestVerify:
    def test_all_checks_pass_on_a_sound_certificate(self, tmp_path):
        out = tmp_path / "ver"
        code = run_command(
            ["verify", "--config", write_cfg(tmp_path, UNIFORM_CFG), "--out", str(out)]
        )
        assert code == EXIT_OK
        summary = read_json(out / "summary.json")
        assert summary["status"] == "pass"
        names = {c["name"] for c in summary["checks"]}
        assert {
            "hitting_moment",
            "split_floor",
            "tail_domination",
            "tv_bound",
            "count_inequality",
            "drift_supermartingale",
            "geometric_sum",
        } <= names
        assert all(c["passed"] for c in summary["checks"])

    def test_infeasible_certificate_exits_two(self, tmp_path):
        cfg = dict(UNIFORM_CFG, params={"beta": 1.0, "delta": 0.5, "theta": 0.9})
        out = tmp_path / "ver2"
        code = run_command(
            ["verify", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]
        )
        assert code == EXIT_INFEASIBLE


class TestDeterminism:
    def test_outputs_byte_identical_across_runs_and_threads(self, tmp_path):
        cfg = write_cfg(tmp_path, UNIFORM_CFG)
        blobs = []
        for tag, threads in (("a", "1"), ("b", "1"), ("c", "3")):
            out = tmp_path / tag
            code = run_command(
                ["simulate", "--config", cfg, "--out", str(out), "--threads", threads]
            )
            assert code == EXIT_OK
            blobs.append(
                (
                    (out / "tail.csv").read_bytes(),
                    (out / "summary.json").read_bytes(),
                )
            )
        assert blobs[0] == blobs[1] == blobs[2]
