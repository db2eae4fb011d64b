import io
import json
import logging
import math

import pytest

from utils.cache import CacheManager
from utils.errors import CacheError, CocSimError, SolverError, ValidationError
from utils.logging import JSONFormatter, setup_logging
from utils.settings import Settings
from utils.validators import (
    validate_increasing,
    validate_int_range,
    validate_positive,
    validate_probability,
    validate_required_fields,
)


class TestErrors:
    def test_to_dict(self):
        err = SolverError("no root", error_code="NO_ROOT", speed=2.0)
        assert err.to_dict() == {
            "error": "SolverError",
            "error_code": "NO_ROOT",
            "message": "no root",
            "details": {"speed": 2.0},
        }
        assert str(err) == "[NO_ROOT] no root"
        assert isinstance(err, CocSimError)

    def test_validation_field_in_details(self):
        err = ValidationError("bad", field="k", error_code="K_EXCEEDS_D")
        assert err.details == {"field": "k"}


class TestValidators:
    def test_positive(self):
        assert validate_positive(1.5, "x")
        assert validate_positive(0.0, "x", allow_zero=True)
        assert validate_positive(math.inf, "x", allow_inf=True)
        for bad in (0.0, -1.0, math.nan, math.inf, "1"):
            with pytest.raises(ValidationError):
                validate_positive(bad, "x")

    def test_positive_error_code(self):
        with pytest.raises(ValidationError) as exc:
            validate_positive(-1.0, "tol", error_code="PARAM_RANGE")
        assert exc.value.error_code == "PARAM_RANGE"

    def test_probability(self):
        assert validate_probability(1.0, "nu")
        with pytest.raises(ValidationError) as exc:
            validate_probability(1.0, "nu", closed_right=False)
        assert exc.value.error_code == "PARAM_RANGE"
        with pytest.raises(ValidationError):
            validate_probability(-0.1, "nu")

    def test_int_range(self):
        assert validate_int_range(3, "d", min_value=1, max_value=3)
        with pytest.raises(ValidationError) as exc:
            validate_int_range(4, "d", min_value=1, max_value=3)
        assert exc.value.details["max"] == 3
        with pytest.raises(ValidationError):
            validate_int_range(True, "d")
        with pytest.raises(ValidationError):
            validate_int_range(2.0, "d")

    def test_increasing(self):
        assert validate_increasing([1, 2, 5], "n_list")
        with pytest.raises(ValidationError):
            validate_increasing([], "n_list")
        with pytest.raises(ValidationError):
            validate_increasing([1, 1], "n_list")

    def test_required_fields(self):
        assert validate_required_fields({"a": 1}, ["a"])
        with pytest.raises(ValidationError) as exc:
            validate_required_fields({"a": 1}, ["a", "b"])
        assert exc.value.details["missing"] == ["b"]
        with pytest.raises(ValidationError):
            validate_required_fields([1], ["a"])


class TestCache:
    @pytest.fixture
    def manager(self):
        return CacheManager(namespace="test", settings=Settings(environment="testing"))

    def test_memory_fallback(self, manager):
        assert manager.redis_client is None
        assert manager.health()["backend"] == "memory"

    def test_set_get_delete(self, manager):
        manager.set("k", {"a": [1, 2]})
        assert manager.get("k") == {"a": [1, 2]}
        manager.delete("k")
        assert manager.get("k") is None

    def test_get_returns_fresh_copies(self, manager):
        manager.set("k", {"a": [1]})
        manager.get("k")["a"].append(2)
        assert manager.get("k") == {"a": [1]}

    def test_get_or_compute(self, manager):
        calls = []

        def compute():
            calls.append(1)
            return {"v_min": 1.0}

        assert manager.get_or_compute("sr", compute) == {"v_min": 1.0}
        assert manager.get_or_compute("sr", compute) == {"v_min": 1.0}
        assert len(calls) == 1

    def test_unserializable_value(self, manager):
        with pytest.raises(CacheError) as exc:
            manager.set("k", object())
        assert exc.value.error_code == "CACHE_SET_ERROR"

    def test_get_or_compute_survives_cache_failure(self, manager):
        assert manager.get_or_compute("k", lambda: {1, 2}) == {1, 2}

    def test_clear_pattern(self, manager):
        manager.set("speed_range:a", 1)
        manager.set("speed_range:b", 2)
        manager.set("fixed_point:a", 3)
        assert manager.clear("speed_range:*") == 2
        assert manager.clear() == 1

    def test_without_fallback(self):
        manager = CacheManager(enable_fallback=False, settings=Settings(environment="testing"))
        manager.set("k", 1)
        assert manager.get("k") is None
        assert manager.health()["status"] == "unhealthy"


class TestSettings:
    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("ENVIRONMENT", "production")
        monkeypatch.setenv("LOG_LEVEL", "WARNING")
        monkeypatch.setenv("COC_WORKERS", "0")
        monkeypatch.setenv("COC_CACHE_NAMESPACE", "runs")
        settings = Settings.from_env(dotenv=False)
        assert settings.environment == "production"
        assert settings.log_level == "WARNING"
        assert settings.workers == 1
        assert settings.cache_namespace == "runs"
        assert not settings.is_testing


class TestLogging:
    def test_json_records(self):
        record = logging.LogRecord("services.meanfield", logging.INFO, __file__, 1, "relaxed %d", (3,), None)
        doc = json.loads(JSONFormatter(environment="testing").format(record))
        assert doc["message"] == "relaxed 3"
        assert doc["service"] == "coc-meanfield"
        assert doc["environment"] == "testing"

    def test_setup_logging_stream(self):
        stream = io.StringIO()
        root = logging.getLogger()
        saved = (root.level, root.handlers[:])
        try:
            setup_logging(level="WARNING", json_format=False, stream=stream)
            logging.getLogger("services.wave_solver").warning("ANALYTIC_FALLBACK")
            assert "ANALYTIC_FALLBACK" in stream.getvalue()
            assert root.level == logging.WARNING
        finally:
            root.setLevel(saved[0])
            root.handlers[:] = saved[1]
