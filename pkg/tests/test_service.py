import io
import warnings

import numpy as np
import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from subwf.service.app import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


MODEL_ID = {
    "theta": [1.0, 1.0],
    "clock": {"kind": "sub", "family": "identity", "params": {}, "beta": 0.0},
    "initial": {"kind": "stationary"},
}
MODEL_INV = {
    "theta": [1.0, 1.0],
    "clock": {"kind": "inverse", "family": "stable", "params": {"alpha": 0.5}, "beta": 0.0},
}
OBS_CSV = "t,y1,y2\n0.0,2,0\n1.0,1,1\n"


class TestHealthAndErrors:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"

    def test_config_error_maps_to_400(self, client):
        bad = {"theta": [1.0], "clock": MODEL_ID["clock"]}
        resp = client.post("/filter", json={"model": bad, "data_csv": OBS_CSV})
        assert resp.status_code == 400
        assert resp.json()["error"]["type"] == "config"

    def test_envelope_validation_is_422(self, client):
        resp = client.post("/filter", json={"data_csv": OBS_CSV})
        assert resp.status_code == 422

    def test_numerical_error_maps_to_409(self, client):
        # a Volterra tolerance below the kernel-inversion floor
        model = {
            "theta": [1.0, 1.0],
            "clock": {"kind": "inverse", "family": "gamma", "params": {"a": 1, "b": 1}},
        }
        resp = client.post(
            "/eigen-decay",
            json={"model": model, "indices": [1], "t_grid": [1.0], "tol": 1e-12},
        )
        assert resp.status_code == 409
        assert resp.json()["error"]["type"] == "numerical"


class TestEndpoints:
    def test_filter_and_smooth(self, client):
        resp = client.post("/filter", json={"model": MODEL_ID, "data_csv": OBS_CSV})
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["steps"]) == 2
        assert body["log_marginal_likelihood"] < 0
        resp2 = client.post("/smooth", json={"model": MODEL_ID, "data_csv": OBS_CSV})
        assert resp2.status_code == 200
        assert len(resp2.json()["smoothed"]) == 2

    def test_dual_weights_csv(self, client):
        resp = client.post(
            "/dual-weights", json={"model": MODEL_ID, "t": 1.0, "start_total": 3}
        )
        assert resp.status_code == 200
        assert resp.headers["content-type"].startswith("text/csv")
        lines = resp.text.strip().splitlines()
        assert lines[0] == "m,weight"
        weights = [float(line.split(",")[1]) for line in lines[1:]]
        assert abs(sum(weights) - 1.0) < 1e-8

    def test_sample_transition_headers_and_determinism(self, client):
        req = {"model": MODEL_ID, "x": [0.5, 0.5], "t": 1.0, "n": 50, "seed": 7}
        r1 = client.post("/sample-transition", json=req)
        r2 = client.post("/sample-transition", json=req)
        assert r1.status_code == 200
        assert r1.content == r2.content
        assert r1.headers["x-subwf-mode"] == "B"
        assert r1.headers["x-subwf-exact"] == "true"

    def test_simulate_path_and_synth_round_trip(self, client):
        synth = client.post(
            "/synth-data",
            json={
                "model": MODEL_ID,
                "times": [0.0, 0.5, 1.0],
                "emission_total": 4,
                "seed": 3,
            },
        )
        assert synth.status_code == 200
        filt = client.post(
            "/filter", json={"model": MODEL_ID, "data_csv": synth.text}
        )
        assert filt.status_code == 200
        assert len(filt.json()["steps"]) == 3

    def test_eigen_decay_ml_column(self, client):
        resp = client.post(
            "/eigen-decay",
            json={"model": MODEL_INV, "indices": [1], "t_grid": [0.5, 1.0], "tol": 1e-6},
        )
        assert resp.status_code == 200
        lines = resp.text.strip().splitlines()
        assert lines[0] == "t,phi_n1,phi_ml_n1"
        for line in lines[1:]:
            _, volterra, ml = (float(v) for v in line.split(","))
            assert abs(volterra - ml) < 1e-5

    def test_nonmarkov_filter_endpoint(self, client):
        resp = client.post(
            "/nonmarkov-filter",
            json={
                "model": MODEL_INV,
                "data_csv": "t,y1,y2\n0.4,2,0\n1.0,1,1\n",
                "clock_draws": 150,
                "seed": 5,
                "grid_step": 2e-3,
            },
        )
        assert resp.status_code == 200
        steps = resp.json()["steps"]
        assert steps[0]["weight_se"] is not None or "weight_se" in steps[0]

    def test_clock_posterior_endpoint(self, client):
        resp = client.post(
            "/clock-posterior",
            json={
                "model": MODEL_INV,
                "data_csv": "t,y1,y2\n0.5,2,0\n",
                "n": 10,
                "seed": 1,
                "grid_step": 2e-3,
            },
        )
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["draws"]) == 10
        assert 0 < body["acceptance_rate"] <= 1

    def test_dual_path_endpoint(self, client):
        resp = client.post(
            "/dual-path",
            json={
                "model": MODEL_ID,
                "start": [5, 5],
                "times": [0.0, 0.5, 1.0],
                "n_paths": 2,
                "seed": 2,
            },
        )
        assert resp.status_code == 200
        lines = resp.text.strip().splitlines()
        assert lines[0] == "path,t,z1,z2"
        assert len(lines) == 1 + 2 * 3
