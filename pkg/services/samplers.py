"""
Named exchangeable (non-iid) component-size generators.

A sampler maps (rng, count, d, params) to a (count, d) array of sizes whose
rows are exchangeable. Only sampling is available for these laws; exact
crossing-rate formulas need iid components.
"""

import logging
from typing import Callable, Dict, Mapping

import numpy as np

from utils.errors import ValidationError

logger = logging.getLogger(__name__)

SamplerFn = Callable[[np.random.Generator, int, int, Mapping[str, float]], np.ndarray]


def common_shock_exp(rng: np.random.Generator, count: int, d: int, params: Mapping[str, float]) -> np.ndarray:
    """xi_i = c*Z + (1-c)*E_i with Z, E_i ~ Exp(rate); marginal mean 1/rate."""
    rate = params.get("rate", 1.0)
    share = params.get("share", 0.5)
    shock = rng.exponential(1.0 / rate, size=(count, 1))
    own = rng.exponential(1.0 / rate, size=(count, d))
    return share * shock + (1.0 - share) * own


def balanced_split(rng: np.random.Generator, count: int, d: int, params: Mapping[str, float]) -> np.ndarray:
    """A Gamma(d, rate) total split by a symmetric Dirichlet; concentration 1 gives iid Exp(rate)."""
    rate = params.get("rate", 1.0)
    concentration = params.get("concentration", 4.0)
    total = rng.gamma(d, 1.0 / rate, size=(count, 1))
    weights = rng.dirichlet(np.full(d, concentration), size=count)
    return total * weights


SAMPLERS: Dict[str, SamplerFn] = {
    "common_shock_exp": common_shock_exp,
    "balanced_split": balanced_split,
}

# parameter ranges checked at validation time: name -> (low, high, low_inclusive)
SAMPLER_PARAMS = {
    "common_shock_exp": {"rate": (0.0, np.inf, False), "share": (0.0, 1.0, True)},
    "balanced_split": {"rate": (0.0, np.inf, False), "concentration": (0.0, np.inf, False)},
}


def get_sampler(name: str) -> SamplerFn:
    try:
        return SAMPLERS[name]
    except KeyError:
        raise ValidationError(
            f"unknown sampler '{name}'",
            field="sizes.sampler",
            details={"known": sorted(SAMPLERS)},
            error_code="UNKNOWN_FAMILY",
        )


def check_params(name: str, params: Mapping[str, float]) -> bool:
    ranges = SAMPLER_PARAMS[name]
    for key, value in params.items():
        if key not in ranges:
            raise ValidationError(
                f"sampler '{name}' has no parameter '{key}'",
                field=f"sizes.params.{key}",
                details={"allowed": sorted(ranges)},
            )
        low, high, low_inclusive = ranges[key]
        ok_low = value >= low if low_inclusive else value > low
        if not (ok_low and value <= high and np.isfinite(value)):
            raise ValidationError(
                f"sampler parameter {key}={value} out of range",
                field=f"sizes.params.{key}",
                error_code="PARAM_RANGE",
            )
    return True
