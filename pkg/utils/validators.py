"""
Data validation utilities.

Provides validation functions for the numeric parameters used throughout the
simulator, the solvers and the request/CLI surfaces.
"""

import math
from numbers import Integral, Real
from typing import Sequence

from utils.errors import ValidationError


def validate_positive(
    value: float,
    field: str,
    allow_zero: bool = False,
    allow_inf: bool = False,
    error_code: str = "VALIDATION_001",
) -> bool:
    """
    Validate a positive (or non-negative) real parameter.

    Args:
        value: Value to validate
        field: Field name reported in the error
        allow_zero: Accept 0
        allow_inf: Accept +inf
        error_code: Code used when the value is out of range

    Returns:
        True if valid

    Raises:
        ValidationError: If value invalid
    """
    if isinstance(value, bool) or not isinstance(value, Real):
        raise ValidationError(f"{field} must be numeric, got {type(value).__name__}", field=field)

    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        raise ValidationError(
            f"{field} must be finite, got {value}",
            field=field,
            details={"provided": value},
            error_code=error_code,
        )

    if value < 0 or (value == 0 and not allow_zero):
        bound = "non-negative" if allow_zero else "positive"
        raise ValidationError(
            f"{field} must be {bound}, got {value}",
            field=field,
            details={"provided": value},
            error_code=error_code,
        )

    return True


def validate_probability(value: float, field: str, closed_right: bool = True) -> bool:
    """
    Validate a probability level in [0, 1] (or [0, 1) when closed_right is False).

    Raises:
        ValidationError: If value invalid (code PARAM_RANGE)
    """
    if isinstance(value, bool) or not isinstance(value, Real) or math.isnan(value):
        raise ValidationError(f"{field} must be numeric", field=field, error_code="PARAM_RANGE")

    upper_ok = value <= 1.0 if closed_right else value < 1.0
    if value < 0.0 or not upper_ok:
        interval = "[0, 1]" if closed_right else "[0, 1)"
        raise ValidationError(
            f"{field} {value} out of range {interval}",
            field=field,
            details={"provided": value},
            error_code="PARAM_RANGE",
        )

    return True


def validate_int_range(value: int, field: str, min_value: int = 1, max_value: int = None) -> bool:
    """
    Validate an integer parameter within [min_value, max_value].

    Raises:
        ValidationError: If value invalid
    """
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise ValidationError(f"{field} must be integer, got {type(value).__name__}", field=field)

    if value < min_value or (max_value is not None and value > max_value):
        raise ValidationError(
            f"{field} {value} out of range [{min_value}, {max_value if max_value is not None else 'inf'}]",
            field=field,
            details={"provided": int(value), "min": min_value, "max": max_value},
            error_code="PARAM_RANGE",
        )

    return True


def validate_increasing(values: Sequence[float], field: str) -> bool:
    """
    Validate that a non-empty sequence is strictly increasing.

    Raises:
        ValidationError: If the sequence is empty or not strictly increasing
    """
    if len(values) == 0:
        raise ValidationError(f"{field} must not be empty", field=field)

    for prev, cur in zip(values, values[1:]):
        if not cur > prev:
            raise ValidationError(
                f"{field} must be strictly increasing",
                field=field,
                details={"provided": list(values)},
            )

    return True


def validate_required_fields(data: dict, required_fields: list) -> bool:
    """
    Validate that required fields are present in dictionary.

    Raises:
        ValidationError: If any required field missing
    """
    if not isinstance(data, dict):
        raise ValidationError(
            f"Data must be dictionary, got {type(data).__name__}",
            field="data",
        )

    missing_fields = [field for field in required_fields if field not in data]

    if missing_fields:
        raise ValidationError(
            f"Missing required fields: {', '.join(missing_fields)}",
            field="required_fields",
            details={"missing": missing_fields, "expected": required_fields},
        )

    return True
