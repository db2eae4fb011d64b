"""
Calculus on tail fields: empirical construction, the compactified Levy
metric, moments, centering, the sup-inverse and CSV serialization.
"""

import csv
import io
import logging
import math
from typing import Optional, Sequence, TextIO, Union

import numpy as np

from models.tail_field import InterpolationMode, TailField
from utils.errors import FieldError

logger = logging.getLogger(__name__)

# fields whose moments exceed this are reported as divergent
OVERFLOW_GUARD = 1e300
PROPER_TOL = 1e-9
LEVY_ITERATIONS = 60


def _compactify(w: np.ndarray) -> np.ndarray:
    """w -> sign(w) (1 - e^{-|w|}), mapping the extended line onto [-1, 1]."""
    return np.sign(w) * -np.expm1(-np.abs(w))


def _expand(s: np.ndarray) -> np.ndarray:
    """Inverse of `_compactify` on (-1, 1)."""
    with np.errstate(divide="ignore"):
        return np.where(s >= 0, -np.log1p(-np.minimum(s, 1.0)), np.log1p(np.maximum(s, -1.0)))


class _CompactDistribution:
    """
    s -> 1 - x_{w(s)}: the distribution function on [-1, 1] of the mass of a
    field after compactification, with the mass at -inf placed at -1 and the
    mass at +inf at 1.
    """

    def __init__(self, x: TailField):
        self.x = x
        self.linear = x.mode == InterpolationMode.LINEAR
        inner = _compactify(x.grid)
        self.breaks = np.concatenate(([-1.0], inner, [1.0]))
        self.after = np.concatenate(([1.0 - x.x_minus_inf], 1.0 - x.values, [1.0]))
        self.first_inner = inner[0]

    def __call__(self, s: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.breaks, s, side="right") - 1
        out = np.where(idx < 0, 0.0, self.after[np.clip(idx, 0, self.after.size - 1)])
        if self.linear:
            inside = (s >= self.first_inner) & (s < 1.0)
            if np.any(inside):
                w = np.maximum(_expand(s[inside]), self.x.grid[0])
                out = out.copy()
                out[inside] = 1.0 - np.interp(w, self.x.grid, self.x.values)
        return out

    def candidates(self) -> np.ndarray:
        if not self.linear or self.breaks.size < 3:
            return self.breaks
        mids = 0.5 * (self.breaks[1:-2] + self.breaks[2:-1])
        return np.concatenate((self.breaks, mids))


def _dominated(g: _CompactDistribution, f: _CompactDistribution, eps: float) -> bool:
    """G(s) <= F(s + eps) + eps for all s, checked where G - F(. + eps) can peak."""
    s = np.concatenate((g.candidates(), f.candidates() - eps))
    return bool(np.all(g(s) <= f(s + eps) + eps + 1e-15))


class FieldCalculator:
    @staticmethod
    def from_samples(locations: Sequence[float]) -> TailField:
        """
        Empirical tail of particle locations (step mode, jumps of 1/n).

        Infinite locations become mass at +-inf.
        """
        loc = np.asarray(locations, dtype=float).reshape(-1)
        n = loc.size
        if n == 0:
            raise FieldError("cannot build a field from no samples", error_code="EMPTY_INPUT")
        if np.any(np.isnan(loc)):
            raise FieldError("sample locations contain NaN", error_code="FIELD_FORMAT")

        plus = int(np.sum(loc == np.inf))
        minus = int(np.sum(loc == -np.inf))
        finite = loc[np.isfinite(loc)]
        x_minus_inf = 1.0 - minus / n
        if finite.size == 0:
            return TailField(grid=[0.0], values=[plus / n], mode=InterpolationMode.STEP, x_minus_inf=x_minus_inf)

        grid, counts = np.unique(finite, return_counts=True)
        right_of = n - minus - np.cumsum(counts)
        values = right_of / n
        return TailField(grid=grid, values=values, mode=InterpolationMode.STEP, x_minus_inf=x_minus_inf)

    @staticmethod
    def from_callable(tail, grid: Sequence[float], x_minus_inf: float = 1.0) -> TailField:
        """Linear-mode field sampling a tail function on a grid."""
        grid = np.asarray(grid, dtype=float)
        return TailField.linear(grid, np.asarray(tail(grid), dtype=float), x_minus_inf=x_minus_inf)

    @staticmethod
    def evaluate(x: TailField, w):
        return x.at(w)

    @staticmethod
    def levy_distance(x: TailField, y: TailField) -> float:
        """
        Levy distance between the compactified distribution functions of two
        fields, by bisection on eps with an exact check on breakpoint sets.
        """
        fx, fy = _CompactDistribution(x), _CompactDistribution(y)

        def within(eps: float) -> bool:
            return _dominated(fx, fy, eps) and _dominated(fy, fx, eps)

        if within(0.0):
            return 0.0
        lo, hi = 0.0, 1.0
        for _ in range(LEVY_ITERATIONS):
            mid = 0.5 * (lo + hi)
            if within(mid):
                hi = mid
            else:
                lo = mid
        return hi

    @staticmethod
    def sup_distance(x: TailField, y: TailField) -> float:
        """sup_w |x_w - y_w| over the merged grid (both one-sided limits)."""
        pts = np.union1d(x.grid, y.grid)
        diff = np.abs(x.at(pts) - y.at(pts))
        diff_left = np.abs(x.left_limit(pts) - y.left_limit(pts))
        ends = [abs(x.x_minus_inf - y.x_minus_inf), abs(x.x_inf - y.x_inf)]
        return float(max(diff.max(), diff_left.max(), *ends))

    # moments

    @staticmethod
    def _require_proper(x: TailField) -> None:
        if not x.is_proper(PROPER_TOL):
            raise FieldError(
                "moments need a proper field (no mass at +-inf)",
                error_code="IMPROPER_FIELD",
                details={"x_inf": x.x_inf, "x_minus_inf": x.x_minus_inf},
            )

    @staticmethod
    def mean(x: TailField) -> float:
        FieldCalculator._require_proper(x)
        loc, mass = x.atoms()
        a, b, seg = x.segments()
        with np.errstate(over="ignore", invalid="ignore"):
            value = float(np.dot(loc, mass) + np.dot(0.5 * (a + b), seg))
        if not math.isfinite(value) or abs(value) > OVERFLOW_GUARD:
            raise FieldError("mean diverges", error_code="DIVERGENT", details={"value": value})
        return value

    @staticmethod
    def phi_moment(x: TailField, ell: float = 1) -> float:
        """Central absolute moment of order `ell`."""
        if ell <= 0:
            raise FieldError(f"moment order must be positive, got {ell}", error_code="FIELD_FORMAT")
        m = FieldCalculator.mean(x)
        loc, mass = x.atoms()
        a, b, seg = x.segments()

        def antiderivative(t):
            return np.sign(t) * np.abs(t) ** (ell + 1) / (ell + 1)

        value = float(np.dot(np.abs(loc - m) ** ell, mass))
        if seg.size:
            width = b - a
            value += float(np.sum(seg / width * (antiderivative(b - m) - antiderivative(a - m))))
        if not math.isfinite(value) or value > OVERFLOW_GUARD:
            raise FieldError("moment diverges", error_code="DIVERGENT", details={"order": ell})
        return value

    @staticmethod
    def center(x: TailField) -> TailField:
        return x.shifted(-FieldCalculator.mean(x))

    @staticmethod
    def inverse(x: TailField, u, floor: float = -math.inf):
        """sup{w : x_w > u}, or `floor` when the set is empty; vectorized over u."""
        u_arr = np.asarray(u, dtype=float)
        # values are non-increasing: count of values > u via the ascending reversal
        cnt = x.values.size - np.searchsorted(x.values[::-1], u_arr, side="right")
        if x.mode == InterpolationMode.STEP:
            finite = x.grid[np.minimum(cnt, x.grid.size - 1)]
        else:
            # linear: x crosses u inside cell [cnt-1, cnt]
            hi = np.minimum(cnt, x.grid.size - 1)
            lo = np.maximum(cnt - 1, 0)
            v_lo, v_hi = x.values[lo], x.values[hi]
            span = np.where(v_lo > v_hi, v_lo - v_hi, 1.0)
            frac = np.clip((v_lo - u_arr) / span, 0.0, 1.0)
            finite = np.where(cnt == 0, x.grid[0], x.grid[lo] + frac * (x.grid[hi] - x.grid[lo]))
        out = np.where(x.x_inf > u_arr, math.inf, np.where(x.x_minus_inf <= u_arr, floor, finite))
        return float(out) if np.ndim(out) == 0 else out

    # serialization

    @staticmethod
    def write_csv(x: TailField, out: TextIO) -> None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["w", "value"])
        for w, v in zip(x.grid.tolist(), x.values.tolist()):
            writer.writerow([repr(w), repr(v)])
        writer.writerow(["mode", x.mode.value])
        writer.writerow(["inf", repr(x.x_inf)])
        writer.writerow(["-inf", repr(x.x_minus_inf)])

    @staticmethod
    def to_csv(x: TailField, path: Optional[str] = None) -> Union[str, None]:
        """Write to `path`, or return the CSV text when no path is given."""
        if path is None:
            buf = io.StringIO()
            FieldCalculator.write_csv(x, buf)
            return buf.getvalue()
        with open(path, "w", encoding="utf-8", newline="") as fh:
            FieldCalculator.write_csv(x, fh)
        logger.debug("Wrote field with %d points to %s", x.grid.size, path)
        return None

    @staticmethod
    def read_csv(src: TextIO) -> TailField:
        rows = list(csv.reader(src))
        if not rows or rows[0] != ["w", "value"]:
            raise FieldError("field CSV must start with header 'w,value'", error_code="FIELD_FORMAT")
        grid, values, footer = [], [], {}
        for row in rows[1:]:
            if not row:
                continue
            if row[0] in ("mode", "inf", "-inf"):
                footer[row[0]] = row[1]
                continue
            try:
                grid.append(float(row[0]))
                values.append(float(row[1]))
            except (ValueError, IndexError):
                raise FieldError(f"malformed field row {row}", error_code="FIELD_FORMAT")
        if set(footer) != {"mode", "inf", "-inf"}:
            raise FieldError("field CSV footer must give mode, inf and -inf", error_code="FIELD_FORMAT")
        field = TailField(
            grid=grid, values=values, mode=InterpolationMode(footer["mode"]), x_minus_inf=float(footer["-inf"])
        )
        if field.x_inf != float(footer["inf"]):
            raise FieldError("footer x_inf disagrees with the last value", error_code="FIELD_FORMAT")
        return field

    @staticmethod
    def from_csv(path: str) -> TailField:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return FieldCalculator.read_csv(fh)
