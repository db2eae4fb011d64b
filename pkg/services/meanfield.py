"""
Mean-field time integration and relaxation to regulated fixed points.

Fields live on a uniform grid in anchored coordinates (fixed frame,
particles drifting left at speed v), where

    d/dt x_w = v d/dw x_w + lambda*h(x_{(-inf, w]}).

When the grid step over v is within the stability bound the drift is
integrated exactly along characteristics (one grid cell per step, source
at the cell midpoint); otherwise Heun's method with upwind transport.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from models.fixed_point import Classification, FieldTrajectory, FixedPointResult, GridSpec
from models.system_config import Frame, FrameKind, SystemConfig
from models.tail_field import TailField
from services.crossing import CrossingCalculator, GridCrossing, terms_mean, terms_support
from services.field_calculus import FieldCalculator
from services.model_core import ModelCore
from utils.errors import SolverError, ValidationError
from utils.validators import validate_positive

logger = logging.getLogger(__name__)

# dt * lambda * dbar^2 bounds for the characteristic and Heun schemes
CHARACTERISTIC_FACTOR = 0.5
HEUN_FACTOR = 0.05
SUPPORT_TAIL = 1e-12
PATIENCE = 3
LOAD_TOL = 1e-6
MONO_TOL = 1e-6
# relaxation time limit, in units of 1/lambda
DEFAULT_MAX_TIME = 5000.0


class _Relaxation:
    """Uniform-grid state of an anchored mean-field integration."""

    def __init__(
        self,
        cfg: SystemConfig,
        speed: float,
        start: float,
        step: float,
        values: np.ndarray,
        x_minus_inf: float,
        spec: GridSpec,
        pin_left: bool,
        pin_right: bool,
    ):
        self.cfg = cfg
        self.terms = CrossingCalculator.crossing_terms(cfg)
        self.speed = speed
        self.start = start
        self.step = step
        self.x_minus_inf = x_minus_inf
        self.spec = spec
        self.pin_left = pin_left
        self.pin_right = pin_right
        self.buffer = int(math.ceil(terms_support(self.terms, SUPPORT_TAIL) / step))
        self.time = 0.0
        self._crossing = {}

        lipschitz = cfg.lam * cfg.dbar**2
        self.characteristic = speed > 0 and step / speed <= CHARACTERISTIC_FACTOR / lipschitz
        if self.characteristic:
            self.dt = step / speed
        else:
            self.dt = HEUN_FACTOR / lipschitz
            if speed > 0:
                self.dt = min(self.dt, 0.9 * step / speed)
        self.values = self._clean(np.asarray(values, dtype=float))
        self._grow()

    @classmethod
    def from_field(
        cls, x0: TailField, cfg: SystemConfig, speed: float, spec: GridSpec, step: Optional[float] = None
    ) -> "_Relaxation":
        frame = cfg.frame
        terms = CrossingCalculator.crossing_terms(cfg)
        scale = terms_mean(terms)
        step = step or spec.relax_step(scale)
        span = spec.span * scale
        kind = frame.kind

        if kind == FrameKind.FINITE:
            count = max(2, int(math.ceil((frame.right - frame.left) / step)) + 1)
            step = (frame.right - frame.left) / (count - 1)
            start = frame.left
        elif kind == FrameKind.LEFT:
            start = frame.left
            count = int(math.ceil((max(x0.grid[-1], start) + span - start) / step)) + 1
        elif kind == FrameKind.RIGHT:
            low = min(x0.grid[0], frame.right) - span
            count = int(math.ceil((frame.right - low) / step)) + 1
            start = frame.right - (count - 1) * step
        else:
            start = float(x0.grid[0])
            count = int(math.ceil((x0.grid[-1] + span - start) / step)) + 1

        nodes = start + step * np.arange(count)
        return cls(
            cfg,
            speed,
            start,
            step,
            np.asarray(x0.at(nodes)),
            x0.x_minus_inf,
            spec,
            pin_left=kind in (FrameKind.LEFT, FrameKind.FINITE),
            pin_right=kind in (FrameKind.RIGHT, FrameKind.FINITE),
        )

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def scheme(self) -> str:
        return "characteristic" if self.characteristic else "heun"

    def nodes(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.size)

    def crossing(self, offset: float) -> GridCrossing:
        key = (self.size, offset)
        gc = self._crossing.get(key)
        if gc is None:
            self._crossing = {k: g for k, g in self._crossing.items() if k[0] == self.size}
            gc = GridCrossing(self.terms, self.step, self.size, offset)
            self._crossing[key] = gc
        return gc

    def _clean(self, values: np.ndarray) -> np.ndarray:
        values = np.clip(values, 0.0, self.x_minus_inf)
        if self.pin_right:
            values[-1] = 0.0
        return np.minimum.accumulate(values)

    def _drift(self, values: np.ndarray) -> np.ndarray:
        out = self.crossing(0.0).rates(values, self.x_minus_inf)
        if self.speed > 0:
            ahead = np.append(values[1:], 0.0 if self.pin_right else values[-1])
            out = out + self.speed * (ahead - values) / self.step
        return out

    def advance(self, dt: Optional[float] = None) -> None:
        values = self.values
        if self.characteristic:
            source = self.crossing(0.5).rates(values, self.x_minus_inf)
            new = np.empty_like(values)
            new[:-1] = values[1:] + self.dt * source[:-1]
            new[-1] = values[-1] + self.dt * source[-1]
            self.time += self.dt
        else:
            dt = self.dt if dt is None else dt
            k1 = self._drift(values)
            k2 = self._drift(self._clean(values + dt * k1))
            new = values + 0.5 * dt * (k1 + k2)
            self.time += dt
        self.values = self._clean(new)
        self._grow()

    def run_until(self, t: float) -> None:
        """Step up to time t (characteristic steps may overshoot by less than one step)."""
        while self.time < t - 1e-12:
            if self.characteristic:
                self.advance()
            else:
                self.advance(min(self.dt, t - self.time))

    def _check_capacity(self, extra: int) -> None:
        if self.size + extra > self.spec.max_points:
            raise SolverError(
                f"grid would exceed {self.spec.max_points} points",
                error_code="GRID_EXHAUSTED",
                speed=self.speed,
                details={"points": self.size, "time": self.time},
            )

    def _grow(self) -> None:
        values = self.values
        if not self.pin_right:
            idx = self.size - 1 - self.buffer
            if idx < 0 or values[idx] - values[-1] > self.spec.edge_tol:
                extra = max(self.buffer, self.size // 2)
                self._check_capacity(extra)
                self.values = np.concatenate((values, np.full(extra, values[-1])))
                logger.debug("Grid grown right by %d points to %d (t=%.3f)", extra, self.size, self.time)
        # with no drift the atom at grid[0] stays put
        if not self.pin_left and self.speed > 0 and self.x_minus_inf - self.values[0] > self.spec.edge_tol:
            extra = max(self.buffer, self.size // 2)
            self._check_capacity(extra)
            self.values = np.concatenate((np.full(extra, self.x_minus_inf), self.values))
            self.start -= extra * self.step
            logger.debug("Grid grown left by %d points to %d (t=%.3f)", extra, self.size, self.time)

    def field(self, trim: bool = True) -> TailField:
        nodes, values = self.nodes(), self.values
        if trim:
            lo, hi = 0, self.size
            if not self.pin_right:
                above = np.nonzero(values > values[-1] + self.spec.tail_tol)[0]
                hi = min(self.size, (above[-1] + 3) if above.size else 2)
            if not self.pin_left:
                below = np.nonzero(values < self.x_minus_inf - self.spec.tail_tol)[0]
                lo = max(0, (below[0] - 1) if below.size else 0)
            tail = values[-1]
            nodes, values = nodes[lo:hi], values[lo:hi].copy()
            values[-1] = tail
        return TailField.linear(nodes, values, x_minus_inf=self.x_minus_inf)

    def residual(self) -> float:
        lo = 1
        hi = self.size - (2 if self.pin_right else 1)
        return self.crossing(0.0).residual(self.values, self.speed, self.x_minus_inf, lo, hi)


def _relax(
    relax: _Relaxation,
    cfg: SystemConfig,
    tol: float,
    max_time: Optional[float],
    direction: int = 0,
    watch_left: bool = False,
    watch_right: bool = False,
):
    """
    Run until successive fields (one time unit 1/lambda apart) stay within
    `tol` in Levy distance for PATIENCE checks. `direction` +1/-1 asserts a
    non-decreasing/non-increasing sweep.
    """
    interval = 1.0 / cfg.lam
    limit = max_time if max_time is not None else DEFAULT_MAX_TIME / cfg.lam
    previous = relax.field(trim=False)
    quiet, distance = 0, math.inf
    while quiet < PATIENCE:
        if relax.time >= limit:
            raise SolverError(
                f"relaxation did not settle within t={limit:g}",
                error_code="MAX_ITERS",
                speed=relax.speed,
                details={"levy": distance, "tol": tol},
            )
        try:
            relax.run_until(relax.time + interval)
        except SolverError as e:
            if e.error_code == "GRID_EXHAUSTED" and (watch_left or watch_right):
                raise SolverError(
                    "mass escapes the frame; no proper fixed point at this speed",
                    error_code="NO_PROPER_FP",
                    speed=relax.speed,
                    details=e.details,
                ) from e
            raise
        current = relax.field(trim=False)

        if direction:
            before = np.asarray(previous.at(current.grid))
            gap = direction * (before - current.values)
            if gap.max() > MONO_TOL:
                raise SolverError(
                    f"relaxation from the empty state is not monotone (violation {gap.max():.3g})",
                    error_code="MONOTONICITY_VIOLATED",
                    speed=relax.speed,
                    details={"time": relax.time, "violation": float(gap.max())},
                )
        if watch_left and relax.values[0] >= 1.0 - LOAD_TOL:
            raise SolverError(
                "load reaches 1; mass escapes to the right",
                error_code="NO_PROPER_FP",
                speed=relax.speed,
                details={"time": relax.time},
            )
        if watch_right and relax.values[-2] < LOAD_TOL:
            raise SolverError(
                "mass leaves the right boundary; it escapes to the left",
                error_code="NO_PROPER_FP",
                speed=relax.speed,
                details={"time": relax.time},
            )

        distance = FieldCalculator.levy_distance(previous, current)
        quiet = quiet + 1 if distance < tol else 0
        logger.debug("Relaxation t=%.2f levy=%.3g points=%d", relax.time, distance, relax.size)
        previous = current
    return distance


class MeanFieldSolver:
    @staticmethod
    def ml_integrate(
        x0: TailField,
        cfg: SystemConfig,
        horizon: float,
        grid: Optional[GridSpec] = None,
        record_times: Optional[Sequence[float]] = None,
        anchored: bool = True,
    ) -> FieldTrajectory:
        """
        Mean-field trajectory from x0 under cfg's frame and speed.

        Unanchored output shifts each field right by v*t (moving boundaries,
        no drift). Recorded times are the step boundaries reached.
        """
        validate_positive(horizon, "horizon", allow_zero=True, error_code="PARAM_RANGE")
        validate_positive(cfg.speed, "speed", allow_zero=True, error_code="PARAM_RANGE")
        times = sorted(record_times) if record_times else [horizon]
        if times[0] < 0 or times[-1] > horizon:
            raise ValidationError("record times must lie in [0, horizon]", field="record_times", error_code="PARAM_RANGE")

        relax = _Relaxation.from_field(x0, cfg, cfg.speed, grid or GridSpec())
        out_times: List[float] = []
        fields: List[TailField] = []
        for t in times:
            relax.run_until(t)
            field = relax.field()
            if not anchored and cfg.speed > 0:
                field = field.shifted(cfg.speed * relax.time)
            out_times.append(relax.time)
            fields.append(field)
        logger.info(
            "Integrated mean field to t=%.3f (%s scheme, %d points)", relax.time, relax.scheme, relax.size
        )
        return FieldTrajectory(times=out_times, fields=fields, anchored=anchored)

    @staticmethod
    def ml_mfp(
        cfg: SystemConfig,
        tol: float = 1e-6,
        grid: Optional[GridSpec] = None,
        max_time: Optional[float] = None,
    ) -> FixedPointResult:
        """
        Minimum (left frame) or maximum (right frame) fixed point, by
        relaxation from the empty state with all mass at the boundary.
        """
        frame = cfg.frame
        if frame.kind not in (FrameKind.LEFT, FrameKind.RIGHT):
            raise ValidationError(
                "relaxation to the extreme fixed point needs a one-sided frame",
                field="frame",
                details=frame.to_dict(),
                error_code="PARAM_RANGE",
            )
        validate_positive(cfg.speed, "speed", error_code="PARAM_RANGE")
        left = frame.kind == FrameKind.LEFT
        anchor = frame.left if left else frame.right
        relax = _Relaxation.from_field(TailField.empty(anchor), cfg, cfg.speed, grid or GridSpec())
        distance = _relax(
            relax,
            cfg,
            tol,
            max_time,
            direction=1 if left else -1,
            watch_left=left,
            watch_right=not left,
        )
        field = relax.field()
        load = float(relax.values[0]) if left else None
        result = FixedPointResult(
            field=field,
            speed=cfg.speed,
            classification=Classification.REGULATED,
            frame=frame,
            grid_step=relax.step,
            residual=relax.residual(),
            load=load,
            hit_point=None if left else frame.right,
            diagnostics={"time": relax.time, "levy_last": distance, "scheme": relax.scheme, "points": relax.size},
        )
        logger.info(
            "ML-MFP for %s frame at v=%s: load=%s residual=%.3g (t=%.1f)",
            frame.kind.value,
            cfg.speed,
            load,
            result.residual,
            relax.time,
        )
        return result

    @staticmethod
    def two_sided_fp(
        cfg: SystemConfig,
        v: Optional[float] = None,
        tol: float = 1e-6,
        initial: Optional[TailField] = None,
        grid: Optional[GridSpec] = None,
        max_time: Optional[float] = None,
    ) -> FixedPointResult:
        """The unique fixed point of a finite frame, relaxed from the empty state (or `initial`)."""
        frame = cfg.frame
        if frame.kind != FrameKind.FINITE:
            raise ValidationError("two-sided fixed point needs a finite frame", field="frame", error_code="PARAM_RANGE")
        v = cfg.speed if v is None else v
        validate_positive(v, "speed", error_code="PARAM_RANGE")
        cfg = cfg.with_speed(v)
        spec = grid or GridSpec()
        terms = CrossingCalculator.crossing_terms(cfg)
        step = min(spec.relax_step(terms_mean(terms)), (frame.right - frame.left) / 200.0)

        start = initial if initial is not None else TailField.empty(frame.left)
        relax = _Relaxation.from_field(start, cfg, v, spec, step=step)
        distance = _relax(relax, cfg, tol, max_time, direction=1 if initial is None else 0)
        result = FixedPointResult(
            field=relax.field(),
            speed=v,
            classification=Classification.REGULATED,
            frame=frame,
            grid_step=relax.step,
            residual=relax.residual(),
            load=float(relax.values[0]),
            diagnostics={"time": relax.time, "levy_last": distance, "scheme": relax.scheme, "points": relax.size},
        )
        logger.debug("Two-sided FP on [%s, %s] at v=%s: load=%.6f", frame.left, frame.right, v, result.load)
        return result

    @staticmethod
    def median_speed_estimate(
        cfg: SystemConfig,
        bounds: Sequence[float] = (8.0, 16.0, 32.0),
        tol_v: float = 1e-2,
        grid: Optional[GridSpec] = None,
        tol: float = 1e-5,
    ) -> dict:
        """
        Speed estimate from frames [0, B]: bisect the drift so the fixed
        point's median sits at B/2, for each B in `bounds`.
        """
        base = cfg.with_frame(Frame())
        lower = 0.5 * sum(c.sigma * ModelCore.expected_min(c.sizes, c.d) for c in cfg.classes if c.sigma > 0)
        upper = sum(c.sigma * c.d * ModelCore.marginal_mean(c.sizes) for c in cfg.classes if c.sigma > 0)
        speeds = []
        for right in bounds:
            framed = base.with_frame(Frame(0.0, float(right)))
            lo, hi = lower, upper
            warm = None
            while hi - lo > tol_v:
                mid = 0.5 * (lo + hi)
                fp = MeanFieldSolver.two_sided_fp(framed, mid, tol=tol, initial=warm, grid=grid)
                warm = fp.field
                median = FieldCalculator.inverse(fp.field, 0.5, floor=0.0)
                if median > right / 2.0:
                    lo = mid
                else:
                    hi = mid
            speeds.append(0.5 * (lo + hi))
            logger.info("Median-centering speed for B=%s: %.5f", right, speeds[-1])
        return {"bounds": [float(b) for b in bounds], "speeds": speeds, "estimate": speeds[-1], "tol_v": tol_v}
