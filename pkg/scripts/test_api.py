"""
HTTP 接口测试
"""
import math
import os
import sys

from fastapi.testclient import TestClient

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.main import app


# 创建测试客户端
client = TestClient(app)


def quick_payload(directory: str) -> dict:
    return {
        "domain": {"R": 1.0, "N": 64},
        "init": {"family": "gaussian", "total_mass": 6.0, "sigma": 0.2},
        "time": {"t_end": 0.1, "sample_stride": 20, "snapshot_times": [0.05, 0.1]},
        "cutoffs": {"radii": [0.3, 0.2], "n": 8},
        "output": {"directory": directory},
    }


class TestSystemAPI:

    def test_health_check(self):
        response = client.get("/api/v1/health/")
        assert response.status_code == 200
        assert response.json()["status"] == "healthy"

    def test_system_info(self):
        response = client.get("/api/v1/system/")
        assert response.status_code == 200
        data = response.json()
        assert data["report_schema_version"] == "1.0"
        assert data["features"]["radial_finite_volume_solver"]

    def test_endpoint_listing(self):
        response = client.get("/api/v1/system/endpoints")
        assert response.status_code == 200
        assert "run" in response.json()


class TestSimulationsAPI:

    def test_sobolev_constant(self):
        response = client.get("/api/v1/simulations/sobolev-constant", params={"R": 1.0, "N": 64, "seed": 7})
        assert response.status_code == 200
        data = response.json()
        assert math.isclose(data["max_ratio"], 1.0 / math.sqrt(math.pi), rel_tol=1e-3)
        assert math.isclose(data["K_sob"], 1.5 * data["max_ratio"])

    def test_sobolev_constant_rejects_bad_query(self):
        response = client.get("/api/v1/simulations/sobolev-constant", params={"R": -1.0})
        assert response.status_code == 422

    def test_run_returns_report(self, tmp_path):
        response = client.post("/api/v1/simulations/run", json=quick_payload(str(tmp_path / "api_run")))
        assert response.status_code == 200
        report = response.json()
        assert report["termination_reason"] == "completed"
        assert report["N"] == 64
        assert (tmp_path / "api_run" / "report.json").is_file()

    def test_run_rejects_unknown_field(self, tmp_path):
        payload = quick_payload(str(tmp_path / "x"))
        payload["domain"]["bogus"] = 1
        response = client.post("/api/v1/simulations/run", json=payload)
        assert response.status_code == 422

    def test_run_rejects_under_resolved_width(self, tmp_path):
        payload = quick_payload(str(tmp_path / "x"))
        payload["init"]["sigma"] = 0.01
        response = client.post("/api/v1/simulations/run", json=payload)
        assert response.status_code == 422

    def test_validate_and_report(self, tmp_path):
        directory = tmp_path / "api_run"
        assert client.post("/api/v1/simulations/run", json=quick_payload(str(directory))).status_code == 200

        response = client.post("/api/v1/simulations/validate", json={"csv_path": str(directory / "series.csv")})
        assert response.status_code == 200
        assert response.json()["valid"]

        response = client.post("/api/v1/simulations/report", json={"run_dir": str(directory)})
        assert response.status_code == 200
        assert response.json()["termination_reason"] == "completed"

    def test_validate_missing_file(self, tmp_path):
        response = client.post("/api/v1/simulations/validate", json={"csv_path": str(tmp_path / "none.csv")})
        assert response.status_code == 200
        assert not response.json()["valid"]

    def test_report_without_run(self, tmp_path):
        response = client.post("/api/v1/simulations/report", json={"run_dir": str(tmp_path)})
        assert response.status_code == 400
