import logging
from datetime import datetime, timezone

import numpy as np
from flask import Blueprint, jsonify, request
from werkzeug.exceptions import HTTPException

from models.system_config import SystemConfig
from models.tail_field import TailField
from services import CrossingCalculator, FieldCalculator, ModelCore, StructureChecker, WaveSolver
from utils.cache import CacheManager, cache
from utils.errors import CocSimError, ValidationError
from utils.validators import validate_int_range, validate_required_fields

logger = logging.getLogger(__name__)

api_bp = Blueprint("api", __name__)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _payload(*required: str) -> dict:
    data = request.get_json(silent=True)
    if data is None:
        raise ValidationError("request body must be a JSON object", field="body")
    validate_required_fields(data, list(required))
    return data


def _config(data: dict) -> SystemConfig:
    cfg = SystemConfig.from_dict(data["config"])
    ModelCore.validate_config(cfg)
    return cfg


def _field(doc: dict) -> TailField:
    if not isinstance(doc, dict):
        raise ValidationError("field must be an object", field="field")
    if "samples" in doc:
        return FieldCalculator.from_samples(doc["samples"])
    return TailField.from_dict(doc)


@api_bp.errorhandler(ValidationError)
def handle_validation_error(e: ValidationError):
    return jsonify(e.to_dict()), 400


@api_bp.errorhandler(CocSimError)
def handle_solver_error(e: CocSimError):
    logger.error("Request failed: %s", e)
    return jsonify(e.to_dict()), 422


@api_bp.errorhandler(Exception)
def handle_unexpected(e: Exception):
    if isinstance(e, HTTPException):
        return e
    logger.exception("Unhandled error on %s", request.path)
    return jsonify({"error": "InternalError", "error_code": "INTERNAL", "message": str(e), "details": {}}), 500


@api_bp.get("/health")
def health():
    """Health check endpoint."""
    return jsonify({"status": "healthy", "timestamp": _timestamp()})


@api_bp.post("/api/validate")
def validate():
    """Validated config and its derived flags. Accepts JSON: { "config": {...} }"""
    data = _payload("config")
    cfg = SystemConfig.from_dict(data["config"])
    return jsonify(ModelCore.validate_config(cfg).to_dict())


@api_bp.post("/api/h-eval")
def h_eval():
    """
    Crossing intensity of a field at one level.
    Accepts JSON: { "config": {...}, "field": {"samples": [...]} | {"grid", "values", ...}, "w": 0.5 }
    """
    data = _payload("config", "field", "w")
    cfg = _config(data)
    x = _field(data["field"])
    w = float(data["w"])
    rng = np.random.default_rng(data.get("seed"))
    h = CrossingCalculator.compute_h(x, w, cfg, method=data.get("method", "auto"), rng=rng)
    return jsonify({"w": w, "h": h, "lambda_h": cfg.lam * h})


@api_bp.post("/api/speed-range")
def speed_range():
    data = _payload("config")
    cfg = _config(data)
    tol = float(data.get("tol", 1e-3))
    sr = WaveSolver.speed_range(cfg, tol_v=tol, cache_manager=cache)
    return jsonify(sr.to_dict())


@api_bp.post("/api/fixed-point")
def fixed_point():
    """Fixed point for the config's frame. Accepts JSON: { "config": {...}, "v": 2.0 }"""
    data = _payload("config")
    cfg = _config(data)
    v = float(data["v"]) if data.get("v") is not None else cfg.speed
    result = cache.get_or_compute(
        cfg.cache_key("fixed_point", v),
        lambda: WaveSolver.fixed_point(cfg, v=v, cache_manager=cache).to_dict(),
        ttl_hours=CacheManager.TTL_FIXED_POINT,
    )
    return jsonify(result)


@api_bp.post("/api/dmono-check")
def dmono_check():
    data = _payload("config")
    cfg = _config(data)
    index = int(data.get("class_index", 0))
    validate_int_range(index, "class_index", min_value=0, max_value=len(cfg.classes) - 1)
    rng = np.random.default_rng(data.get("seed", 0))
    report = StructureChecker.d_monotonicity_check(
        cfg.classes[index],
        data.get("gaps", [0.0, 0.5, 2.0]),
        samples=int(data.get("samples", 20_000)),
        rng=rng,
    )
    return jsonify(report.to_dict())


@api_bp.get("/admin/cache/health")
def cache_health():
    return jsonify({**cache.health(), "timestamp": _timestamp()})


@api_bp.post("/admin/cache/clear")
def cache_clear():
    """Clear cache entries. Accepts JSON: { "pattern": "speed_range:*" } (optional)"""
    data = request.get_json(silent=True) or {}
    pattern = data.get("pattern")
    removed = cache.clear(pattern)
    return jsonify({"cleared": removed, "pattern": pattern, "timestamp": _timestamp()})
