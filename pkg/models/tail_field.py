"""
TailField dataclass - a non-increasing [0,1]-valued tail function w -> x_w.

x_w is the fraction of mass strictly right of w. Mass may sit at +inf
(x_inf = values[-1]) and at -inf (1 - x_minus_inf). Mass left of grid[0]
that is not at -inf is an atom at grid[0] of size x_minus_inf - values[0].

Step mode: right-continuous steps, atoms at every breakpoint.
Linear mode: mass of each grid cell spread uniformly over the cell.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np

from utils.errors import FieldError

# tolerated round-off when checking monotonicity and range
MONO_TOL = 1e-12


class InterpolationMode(str, Enum):
    STEP = "step"
    LINEAR = "linear"


@dataclass(frozen=True, eq=False)
class TailField:
    grid: np.ndarray
    values: np.ndarray
    mode: InterpolationMode = InterpolationMode.STEP
    x_minus_inf: float = 1.0

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float, copy=True).reshape(-1)
        values = np.array(self.values, dtype=float, copy=True).reshape(-1)
        mode = InterpolationMode(self.mode)

        if grid.size == 0 or grid.size != values.size:
            raise FieldError(
                "grid and values must be non-empty and of equal length",
                error_code="FIELD_FORMAT",
                details={"grid": int(grid.size), "values": int(values.size)},
            )
        if not np.all(np.isfinite(grid)) or np.any(np.diff(grid) <= 0):
            raise FieldError("grid must be finite and strictly increasing", error_code="FIELD_FORMAT")
        if np.any(np.diff(values) > MONO_TOL) or values.min() < -MONO_TOL or values.max() > 1 + MONO_TOL:
            raise FieldError("values must be non-increasing within [0, 1]", error_code="FIELD_FORMAT")
        x_minus_inf = float(self.x_minus_inf)
        if values[0] > x_minus_inf + MONO_TOL or x_minus_inf > 1 + MONO_TOL:
            raise FieldError(
                "x_minus_inf must dominate values and lie in [0, 1]",
                error_code="FIELD_FORMAT",
                details={"x_minus_inf": x_minus_inf, "values[0]": float(values[0])},
            )

        values = np.minimum.accumulate(np.clip(values, 0.0, 1.0))
        x_minus_inf = min(max(x_minus_inf, float(values[0])), 1.0)
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "x_minus_inf", x_minus_inf)

    # constructors

    @classmethod
    def empty(cls, at: float = 0.0) -> "TailField":
        """All mass at one point: x_w = 1 for w < at, 0 afterwards."""
        return cls(grid=[at], values=[0.0], mode=InterpolationMode.STEP, x_minus_inf=1.0)

    @classmethod
    def infinite(cls) -> "TailField":
        """All mass at +inf: x_w = 1 everywhere."""
        return cls(grid=[0.0], values=[1.0], mode=InterpolationMode.STEP, x_minus_inf=1.0)

    @classmethod
    def linear(cls, grid, values, x_minus_inf: float = 1.0) -> "TailField":
        return cls(grid=grid, values=values, mode=InterpolationMode.LINEAR, x_minus_inf=x_minus_inf)

    # evaluation

    @property
    def x_inf(self) -> float:
        return float(self.values[-1])

    @property
    def finite_mass(self) -> float:
        return self.x_minus_inf - self.x_inf

    def is_proper(self, tol: float = MONO_TOL) -> bool:
        return self.x_inf <= tol and self.x_minus_inf >= 1.0 - tol

    def at(self, w: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """x_w, vectorized over w (x_{-inf} below the grid, x_inf beyond it)."""
        w_arr = np.asarray(w, dtype=float)
        if self.mode == InterpolationMode.STEP:
            idx = np.searchsorted(self.grid, w_arr, side="right") - 1
            out = np.where(idx < 0, self.x_minus_inf, self.values[np.maximum(idx, 0)])
        else:
            out = np.where(w_arr < self.grid[0], self.x_minus_inf, np.interp(w_arr, self.grid, self.values))
        return float(out) if np.ndim(out) == 0 else out

    def left_limit(self, w: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """x_{w-}: fraction of mass at or right of w."""
        w_arr = np.asarray(w, dtype=float)
        if self.mode == InterpolationMode.STEP:
            idx = np.searchsorted(self.grid, w_arr, side="left") - 1
            out = np.where(idx < 0, self.x_minus_inf, self.values[np.maximum(idx, 0)])
        else:
            out = np.where(w_arr <= self.grid[0], self.x_minus_inf, np.interp(w_arr, self.grid, self.values))
        return float(out) if np.ndim(out) == 0 else out

    def atoms(self) -> Tuple[np.ndarray, np.ndarray]:
        """Finite atoms as (locations, masses)."""
        if self.mode == InterpolationMode.STEP:
            prev = np.concatenate(([self.x_minus_inf], self.values[:-1]))
            return self.grid.copy(), prev - self.values
        return self.grid[:1].copy(), np.array([self.x_minus_inf - self.values[0]])

    def segments(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Uniformly spread cells as (left ends, right ends, masses); empty in step mode."""
        if self.mode == InterpolationMode.STEP:
            empty = np.empty(0)
            return empty, empty, empty
        return self.grid[:-1].copy(), self.grid[1:].copy(), self.values[:-1] - self.values[1:]

    def shifted(self, delta: float) -> "TailField":
        return TailField(self.grid + delta, self.values, self.mode, self.x_minus_inf)

    # serialization

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "values": self.values.tolist(),
            "mode": self.mode.value,
            "x_inf": self.x_inf,
            "x_minus_inf": self.x_minus_inf,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TailField":
        try:
            return cls(
                grid=d["grid"],
                values=d["values"],
                mode=InterpolationMode(d.get("mode", "step")),
                x_minus_inf=float(d.get("x_minus_inf", 1.0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FieldError(f"malformed field document: {e}", error_code="FIELD_FORMAT")

    def __repr__(self) -> str:
        return (
            f"TailField(points={self.grid.size}, mode={self.mode.value}, "
            f"range=[{self.grid[0]:.4g}, {self.grid[-1]:.4g}], x_inf={self.x_inf:.3g}, "
            f"x_minus_inf={self.x_minus_inf:.3g})"
        )
