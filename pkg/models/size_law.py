"""
SizeDistribution dataclass - a scalar component-size law on [0, inf).

Carries the closed-form CDF, integrated survival and moments of each
parametric family; Laplace transforms and hazard checks live in
services.model_core.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from utils.errors import ValidationError

ArrayLike = Union[float, Sequence[float], np.ndarray]


class DistFamily(str, Enum):
    EXPONENTIAL = "exp"
    DETERMINISTIC = "det"
    UNIFORM = "uniform"
    TRUNCATED = "truncated"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class SizeDistribution:
    family: DistFamily
    rate: Optional[float] = None
    a: Optional[float] = None
    cap: Optional[float] = None
    inner: Optional["SizeDistribution"] = None
    points: Tuple[float, ...] = ()
    _sorted: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family == DistFamily.EMPIRICAL:
            object.__setattr__(self, "_sorted", np.sort(np.asarray(self.points, dtype=float)))

    # constructors

    @classmethod
    def exponential(cls, rate: float) -> "SizeDistribution":
        if not rate > 0 or math.isinf(rate):
            raise ValidationError(f"exponential rate must be positive, got {rate}", field="rate")
        return cls(DistFamily.EXPONENTIAL, rate=float(rate))

    @classmethod
    def deterministic(cls, a: float) -> "SizeDistribution":
        if not a >= 0 or math.isinf(a):
            raise ValidationError(f"deterministic size must be non-negative, got {a}", field="a")
        return cls(DistFamily.DETERMINISTIC, a=float(a))

    @classmethod
    def uniform(cls, a: float) -> "SizeDistribution":
        if not a > 0 or math.isinf(a):
            raise ValidationError(f"uniform upper end must be positive, got {a}", field="a")
        return cls(DistFamily.UNIFORM, a=float(a))

    @classmethod
    def truncated(cls, inner: "SizeDistribution", cap: float) -> "SizeDistribution":
        if not cap > 0 or math.isinf(cap):
            raise ValidationError(f"truncation cap must be positive and finite, got {cap}", field="cap")
        return cls(DistFamily.TRUNCATED, cap=float(cap), inner=inner)

    @classmethod
    def empirical(cls, sample: Sequence[float]) -> "SizeDistribution":
        arr = np.sort(np.asarray(sample, dtype=float))
        if arr.size == 0:
            raise ValidationError("empirical sample must not be empty", field="sample")
        if not np.all(np.isfinite(arr)) or arr[0] < 0:
            raise ValidationError("empirical sample must be finite and non-negative", field="sample")
        return cls(DistFamily.EMPIRICAL, points=tuple(float(p) for p in arr))

    # evaluation

    def cdf(self, w: ArrayLike) -> np.ndarray:
        """P(xi <= w), vectorized."""
        w = np.asarray(w, dtype=float)
        if self.family == DistFamily.EXPONENTIAL:
            return np.where(w >= 0, -np.expm1(-self.rate * np.maximum(w, 0.0)), 0.0)
        if self.family == DistFamily.DETERMINISTIC:
            return (w >= self.a).astype(float)
        if self.family == DistFamily.UNIFORM:
            return np.clip(w / self.a, 0.0, 1.0)
        if self.family == DistFamily.TRUNCATED:
            return np.where(w >= self.cap, 1.0, self.inner.cdf(w))
        return np.searchsorted(self._sorted, w, side="right") / self._sorted.size

    def survival(self, w: ArrayLike) -> np.ndarray:
        return 1.0 - self.cdf(w)

    def integrated_survival(self, z: ArrayLike) -> np.ndarray:
        """G(z) = int_0^z (1 - H(u)) du, zero for z <= 0."""
        z = np.maximum(np.asarray(z, dtype=float), 0.0)
        if self.family == DistFamily.EXPONENTIAL:
            return -np.expm1(-self.rate * z) / self.rate
        if self.family == DistFamily.DETERMINISTIC:
            return np.minimum(z, self.a)
        if self.family == DistFamily.UNIFORM:
            zc = np.minimum(z, self.a)
            return zc - zc * zc / (2.0 * self.a)
        if self.family == DistFamily.TRUNCATED:
            return self.inner.integrated_survival(np.minimum(z, self.cap))
        pts = self._sorted
        idx = np.searchsorted(pts, z, side="right")
        csum = np.concatenate(([0.0], np.cumsum(pts)))
        return (csum[idx] + z * (pts.size - idx)) / pts.size

    def mean(self) -> float:
        if self.family == DistFamily.EXPONENTIAL:
            return 1.0 / self.rate
        if self.family == DistFamily.DETERMINISTIC:
            return self.a
        if self.family == DistFamily.UNIFORM:
            return self.a / 2.0
        if self.family == DistFamily.TRUNCATED:
            return float(self.inner.integrated_survival(self.cap))
        return float(np.mean(self._sorted))

    def second_moment(self) -> float:
        if self.family == DistFamily.EXPONENTIAL:
            return 2.0 / self.rate**2
        if self.family == DistFamily.DETERMINISTIC:
            return self.a**2
        if self.family == DistFamily.UNIFORM:
            return self.a**2 / 3.0
        if self.family == DistFamily.TRUNCATED:
            value, _ = integrate.quad(
                lambda u: 2.0 * u * float(self.inner.survival(u)),
                0.0,
                self.cap,
                points=self.inner.kinks(self.cap),
                limit=200,
            )
            return value
        return float(np.mean(self._sorted**2))

    def upper_support(self, tail: float = 1e-12) -> float:
        """Smallest point beyond which the survival is at most `tail`."""
        if self.family == DistFamily.EXPONENTIAL:
            return -math.log(tail) / self.rate
        if self.family in (DistFamily.DETERMINISTIC, DistFamily.UNIFORM):
            return self.a
        if self.family == DistFamily.TRUNCATED:
            return min(self.cap, self.inner.upper_support(tail))
        return float(self._sorted[-1])

    def kinks(self, upper: float) -> Optional[list]:
        """Interior points of (0, upper) where the CDF is not smooth (quadrature hints)."""
        if self.family in (DistFamily.DETERMINISTIC, DistFamily.UNIFORM):
            pts = [self.a] if 0 < self.a < upper else []
        elif self.family == DistFamily.TRUNCATED:
            pts = [p for p in (self.inner.kinks(upper) or []) if p < self.cap]
            if self.cap < upper:
                pts.append(self.cap)
        elif self.family == DistFamily.EMPIRICAL:
            pts = [p for p in np.unique(self._sorted)[:50] if 0 < p < upper]
        else:
            pts = []
        return pts or None

    def is_point_mass(self) -> bool:
        if self.family == DistFamily.DETERMINISTIC:
            return True
        if self.family == DistFamily.EMPIRICAL:
            return self._sorted[0] == self._sorted[-1]
        if self.family == DistFamily.TRUNCATED:
            return self.inner.is_point_mass() or float(self.inner.cdf(0.0)) == 1.0
        return False

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == DistFamily.EXPONENTIAL:
            return rng.exponential(1.0 / self.rate, size=size)
        if self.family == DistFamily.DETERMINISTIC:
            return np.full(size, self.a, dtype=float)
        if self.family == DistFamily.UNIFORM:
            # (0, a]
            return self.a * (1.0 - rng.random(size))
        if self.family == DistFamily.TRUNCATED:
            return np.minimum(self.inner.sample(rng, size), self.cap)
        return rng.choice(self._sorted, size=size)

    # serialization

    def to_dict(self) -> dict:
        if self.family == DistFamily.EXPONENTIAL:
            return {"type": "exp", "rate": self.rate}
        if self.family in (DistFamily.DETERMINISTIC, DistFamily.UNIFORM):
            return {"type": self.family.value, "a": self.a}
        if self.family == DistFamily.TRUNCATED:
            return {"type": "truncated", "dist": self.inner.to_dict(), "cap": self.cap}
        return {"type": "empirical", "sample": list(self.points)}

    @classmethod
    def from_dict(cls, d: dict) -> "SizeDistribution":
        if not isinstance(d, dict) or "type" not in d:
            raise ValidationError("distribution must be an object with a 'type'", field="dist")
        kind = d["type"]
        try:
            if kind == "exp":
                return cls.exponential(float(d["rate"]))
            if kind == "det":
                return cls.deterministic(float(d["a"]))
            if kind == "uniform":
                return cls.uniform(float(d["a"]))
            if kind == "truncated":
                return cls.truncated(cls.from_dict(d["dist"]), float(d["cap"]))
            if kind == "empirical":
                return cls.empirical(d["sample"])
        except KeyError as e:
            raise ValidationError(
                f"distribution '{kind}' is missing parameter {e}", field="dist", details={"dist": d}
            )
        raise ValidationError(
            f"unknown distribution type '{kind}'",
            field="dist.type",
            details={"provided": kind},
            error_code="UNKNOWN_FAMILY",
        )
