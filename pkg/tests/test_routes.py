import math

import pytest

from main import app
from utils.cache import cache

from conftest import config_dict


@pytest.fixture
def client():
    app.config["TESTING"] = True
    cache.clear()
    with app.test_client() as client:
        yield client


def test_root_lists_endpoints(client):
    body = client.get("/").get_json()
    assert body["service"] == "coc-meanfield"
    assert "POST /api/h-eval" in body["endpoints"]


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.get_json()["status"] == "healthy"


class TestValidate:
    def test_flags(self, client):
        response = client.post("/api/validate", json={"config": config_dict()})
        assert response.status_code == 200
        assert response.get_json()["flags"]["all_iid_ihr"]

    def test_missing_body(self, client):
        response = client.post("/api/validate", data="not json", content_type="text/plain")
        assert response.status_code == 400
        assert response.get_json()["error"] == "ValidationError"

    def test_missing_config(self, client):
        response = client.post("/api/validate", json={"other": 1})
        assert response.status_code == 400
        assert response.get_json()["details"]["missing"] == ["config"]

    def test_structural_error_code(self, client):
        response = client.post("/api/validate", json={"config": config_dict(d=2, k=3)})
        assert response.status_code == 400
        assert response.get_json()["error_code"] == "K_EXCEEDS_D"


class TestSolvers:
    def test_h_eval_samples(self, client):
        payload = {"config": config_dict(d=1, k=1), "field": {"samples": [0.0]}, "w": 1.0}
        body = client.post("/api/h-eval", json=payload).get_json()
        assert body["h"] == pytest.approx(math.exp(-1.0))

    def test_h_eval_field_document(self, client):
        field = {"grid": [0.0], "values": [0.0], "mode": "step", "x_minus_inf": 1.0}
        payload = {"config": config_dict(d=1, k=1), "field": field, "w": 1.0}
        body = client.post("/api/h-eval", json=payload).get_json()
        assert body["h"] == pytest.approx(math.exp(-1.0))

    def test_h_eval_bad_field(self, client):
        payload = {"config": config_dict(), "field": [1, 2], "w": 0.5}
        assert client.post("/api/h-eval", json=payload).status_code == 400

    def test_speed_range_fallback(self, client):
        body = client.post("/api/speed-range", json={"config": config_dict(d=1, k=1)}).get_json()
        assert body["analytic_fallback"]
        assert body["v_star"] == pytest.approx(1.0)

    def test_fixed_point_is_cached(self, client):
        payload = {"config": config_dict(left=0.0, right=4.0, speed=1.0)}
        first = client.post("/api/fixed-point", json=payload)
        assert first.status_code == 200
        assert cache.health()["entries"] == 1
        second = client.post("/api/fixed-point", json=payload)
        assert second.get_json() == first.get_json()

    def test_solver_error_is_unprocessable(self, client):
        payload = {"config": config_dict(d=1, k=1, left=0.0, speed=0.5)}
        response = client.post("/api/fixed-point", json=payload)
        assert response.status_code == 422
        assert response.get_json()["error_code"] == "SPEED_IN_WAVE_RANGE"

    def test_dmono_check(self, client):
        payload = {"config": config_dict(dist={"type": "det", "a": 1.0}), "gaps": [0.0, 2.0], "samples": 200}
        body = client.post("/api/dmono-check", json=payload).get_json()
        assert [c["mean"] for c in body["cells"]] == pytest.approx([2.0, 1.0])

    def test_dmono_check_class_index(self, client):
        payload = {"config": config_dict(), "class_index": 4}
        response = client.post("/api/dmono-check", json=payload)
        assert response.status_code == 400
        assert response.get_json()["error_code"] == "PARAM_RANGE"


class TestCacheAdmin:
    def test_health_reports_memory_fallback(self, client):
        body = client.get("/admin/cache/health").get_json()
        assert body["backend"] == "memory"
        assert body["status"] == "degraded"

    def test_clear_by_pattern(self, client):
        cache.set("speed_range:abc", {"v": 1})
        cache.set("fixed_point:abc", {"v": 2})
        body = client.post("/admin/cache/clear", json={"pattern": "speed_range:*"}).get_json()
        assert body["cleared"] == 1
        assert cache.get("fixed_point:abc") == {"v": 2}
