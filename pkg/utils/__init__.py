"""
Utilities package for coc-meanfield.

Provides logging, settings, caching, validation and error handling.
"""

from utils.settings import Settings
from utils.logging import setup_logging, init_logging_from_env, get_logger
from utils.cache import CacheManager, cache
from utils.errors import (
    CocSimError,
    CacheError,
    ValidationError,
    FieldError,
    SimulationError,
    SolverError,
    ExperimentError,
)
from utils.validators import (
    validate_positive,
    validate_probability,
    validate_int_range,
    validate_increasing,
    validate_required_fields,
)

__all__ = [
    # Settings
    "Settings",
    # Logging
    "setup_logging",
    "init_logging_from_env",
    "get_logger",
    # Cache
    "CacheManager",
    "cache",
    # Errors
    "CocSimError",
    "CacheError",
    "ValidationError",
    "FieldError",
    "SimulationError",
    "SolverError",
    "ExperimentError",
    # Validators
    "validate_positive",
    "validate_probability",
    "validate_int_range",
    "validate_increasing",
    "validate_required_fields",
]
