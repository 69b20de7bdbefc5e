import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from subwf.cli import main

MODEL_ID = {
    "theta": [1.0, 1.0],
    "clock": {"kind": "sub", "family": "identity", "params": {}, "beta": 0.0},
    "initial": {"kind": "stationary"},
}
MODEL_INV = {
    "theta": [1.0, 1.0],
    "clock": {"kind": "inverse", "family": "stable", "params": {"alpha": 0.5}, "beta": 0.0},
}


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "model.json").write_text(json.dumps(MODEL_ID))
    (tmp_path / "model_inv.json").write_text(json.dumps(MODEL_INV))
    return tmp_path


def run_cli(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


class TestRoundTrip:
    def test_synth_then_filter(self, workdir):
        obs = workdir / "obs.csv"
        res = run_cli(
            "synth-data", "--model", workdir / "model.json", "--times", "0,1,2",
            "--emission-total", "4", "--seed", "11", "--out", obs,
        )
        assert res.exit_code == 0, res.output
        assert obs.read_text().startswith("t,y1,y2")
        trace = workdir / "trace.json"
        res = run_cli(
            "filter", "--model", workdir / "model.json", "--data", obs, "--out", trace
        )
        assert res.exit_code == 0, res.output
        body = json.loads(trace.read_text())
        assert len(body["steps"]) == 3
        manifest = json.loads(Path(str(trace) + ".manifest.json").read_text())
        assert manifest["command"] == "filter"
        assert "wall_time_s" in manifest

    def test_determinism(self, workdir):
        a, b = workdir / "a.csv", workdir / "b.csv"
        for out in (a, b):
            res = run_cli(
                "sample-transition", "--model", workdir / "model.json",
                "--x", "0.5,0.5", "--t", "1.0", "--n", "200", "--seed", "9",
                "--out", out,
            )
            assert res.exit_code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_eigen_decay_properties(self, workdir):
        out = workdir / "eigen.csv"
        res = run_cli(
            "eigen-decay", "--model", workdir / "model.json", "--indices", "1,2",
            "--t-grid", "0.2:2.0:0.2", "--out", out,
        )
        assert res.exit_code == 0
        lines = out.read_text().strip().splitlines()
        cols = list(zip(*(line.split(",") for line in lines[1:])))
        for col in cols[1:]:
            vals = [float(v) for v in col]
            assert all(0 < v <= 1 for v in vals)
            assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_dual_weights_normalized(self, workdir):
        out = workdir / "w.csv"
        res = run_cli(
            "dual-weights", "--model", workdir / "model.json", "--t", "0.5",
            "--start-total", "6", "--out", out,
        )
        assert res.exit_code == 0
        weights = [float(line.split(",")[1]) for line in out.read_text().strip().splitlines()[1:]]
        assert abs(sum(weights) - 1.0) < 1e-8


class TestExitCodes:
    def test_missing_data_file_is_io(self, workdir):
        res = CliRunner().invoke(
            main,
            ["filter", "--model", str(workdir / "model.json"), "--data",
             str(workdir / "nope.csv"), "--out", str(workdir / "x.json")],
        )
        assert res.exit_code == 4
        assert "error" in res.stderr

    def test_config_error_is_2(self, workdir):
        obs = workdir / "obs.csv"
        obs.write_text("t,y1,y2\n0.0,1,1\n")
        res = CliRunner().invoke(
            main,
            ["filter", "--model", str(workdir / "model_inv.json"), "--data",
             str(obs), "--out", str(workdir / "x.json")],
        )
        assert res.exit_code == 2
        assert json.loads(res.stderr)["error"]["type"] == "config"

    def test_numerical_error_is_3(self, workdir):
        out = workdir / "eigen.csv"
        model = workdir / "model_invg.json"
        model.write_text(json.dumps({
            "theta": [1.0, 1.0],
            "clock": {"kind": "inverse", "family": "gamma", "params": {"a": 1, "b": 1}},
        }))
        res = CliRunner().invoke(
            main,
            ["eigen-decay", "--model", str(model), "--t-grid", "1.0:1.0:1.0",
             "--tol", "1e-12", "--out", str(out)],
        )
        assert res.exit_code == 3
        assert json.loads(res.stderr)["error"]["type"] == "numerical"

    def test_bad_model_json_is_2(self, workdir):
        bad = workdir / "bad.json"
        bad.write_text("{not json")
        res = CliRunner().invoke(
            main,
            ["dual-weights", "--model", str(bad), "--t", "1.0", "--out",
             str(workdir / "w.csv")],
        )
        assert res.exit_code == 2
