import pytest
from fastapi.testclient import TestClient

from tiltedlines.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


class TestReferenceEndpoints:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"

    def test_airy(self, client):
        r = client.get("/reference/airy", params={"x": 0.0})
        body = r.json()
        assert body["ai"] == pytest.approx(0.3550280539, abs=1e-9)
        assert body["accuracy_guaranteed"]
        r2 = client.get("/reference/airy", params={"x": 30.0})
        assert not r2.json()["accuracy_guaranteed"]

    def test_fs_density(self, client):
        r = client.get("/reference/fs-density", params={"x": 1.0})
        body = r.json()
        assert body["pdf"] > 0 and 0 < body["cdf"] < 1
        assert client.get("/reference/fs-density",
                          params={"x": -1.0}).json()["pdf"] == 0.0

    def test_tail_coefficient(self, client):
        r = client.get("/reference/tail-coefficient", params={"lam": 4.0})
        assert r.json()["c_k"] == pytest.approx(1.8856180832, abs=1e-9)
        r2 = client.get("/reference/tail-coefficient", params={"lam": 0.5, "k": 2})
        assert r2.status_code == 422


class TestRunEndpoints:
    def test_run_and_report(self, client, tmp_path):
        body = {"config_text": "kind = fs-reference\nseed = 4\n",
                "out_dir": str(tmp_path / "o"), "threads": 1}
        r = client.post("/experiments/run", json=body)
        assert r.status_code == 200
        assert r.json()["exit_code"] == 0
        rep = client.post("/experiments/report",
                          json={"out_dir": str(tmp_path / "o")})
        assert rep.json()["passed"]

    def test_config_validation_422(self, client, tmp_path):
        body = {"config_text": "kind = fs-reference\nlam = 0.3\n",
                "out_dir": str(tmp_path / "o")}
        r = client.post("/experiments/run", json=body)
        assert r.status_code == 422
        assert "lambda" in r.json()["detail"]

    def test_exactly_one_config_source(self, client, tmp_path):
        r = client.post("/experiments/run",
                        json={"out_dir": str(tmp_path / "o")})
        assert r.status_code == 422

    def test_structured_config_with_seed_override(self, client, tmp_path):
        body = {"config": {"kind": "fs-reference", "seed": 1},
                "out_dir": str(tmp_path / "o"), "seed": 99}
        r = client.post("/experiments/run", json=body)
        assert r.status_code == 200
        import json as _json
        params = _json.load(open(tmp_path / "o" / "params.json"))
        assert params["config"]["seed"] == 99
