"""
Fixed points as solutions of the functional ODE

    -v d/dw x_w = lambda*h(x_{(-inf, w]})

marched forward in w from an exponential left tail (free frame) or from
the left boundary (left frame), with shooting classification, the
speed-range bisection and the regulated fixed points built on it.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from models.fixed_point import Classification, FixedPointResult, GridSpec, SpeedRange, UniquenessProbe
from models.system_config import Frame, FrameKind, SystemConfig
from models.tail_field import TailField
from services.crossing import (
    CrossingCalculator,
    CrossingTerm,
    GridCrossing,
    binom_cdf_scalar,
    terms_mean,
    terms_support,
)
from services.field_calculus import FieldCalculator
from services.meanfield import MeanFieldSolver
from services.model_core import ModelCore
from utils.cache import CacheManager
from utils.errors import SolverError, ValidationError
from utils.validators import validate_positive, validate_probability

logger = logging.getLogger(__name__)

# shooting step is also bounded by this fraction of the tail length 1/beta
BETA_STEP = 0.02
CORRECTOR_PASSES = 2
LOWER_HALVINGS = 5
UPPER_FRACTIONS = (0.5, 0.75, 0.9, 0.97, 0.99)
UNIQUENESS_FACTORS = (0.9, 0.95, 1.0, 1.05)
FLUX_SUPPORT_TAIL = 1e-12

HIT = "hit_axis"
PROPER = "proper_free"
IMPROPER = "improper_right"
AMBIGUOUS = "ambiguous"


class _Marcher:
    """
    Forward march of the fixed-point ODE on a uniform grid starting at node
    0, which carries the atom of all mass left of the grid. Segment masses
    enter the crossing rate through per-term convolution kernels; the
    history part of each convolution is accumulated once per node.
    """

    def __init__(self, terms: List[CrossingTerm], step: float, speed: float, capacity: int, atom: float):
        self.terms = terms
        self.step = step
        self.speed = speed
        self.atom = atom
        self.capacity = capacity
        self.values = np.zeros(capacity)
        self.masses = np.zeros(capacity)
        self.rates = np.zeros(capacity)
        gc = GridCrossing(terms, step, capacity, 0.0)
        self.kernels = gc.kernels
        self.reversed = [k[::-1].copy() for k in gc.kernels]
        self.cdf = gc.cdf_at
        self.survival = gc.survival_at

    def _history(self, k: int) -> List[float]:
        out = []
        for kernel, rev in zip(self.kernels, self.reversed):
            length = kernel.size
            lo = max(0, k - length + 1)
            if k - 1 - lo <= 0:
                out.append(0.0)
                continue
            out.append(float(np.dot(self.masses[lo : k - 1], rev[length - 1 - (k - lo) : length - 2])))
        return out

    def _rate(self, k: int, value: float, history: List[float]) -> float:
        first = self.values[0] if k > 0 else value
        total = 0.0
        for t, kernel, cdf, surv, hist in zip(self.terms, self.kernels, self.cdf, self.survival, history):
            conv = hist + (self.values[k - 1] - value) * kernel[1] if k > 0 and kernel.size > 1 else hist
            inside = self.atom * surv[k] + conv
            p = min(max(self.atom * cdf[k] + (first - value) - conv, 0.0), 1.0)
            total += t.coef * binom_cdf_scalar(t.k - 1, t.d - 1, p) * max(inside, 0.0)
        return total

    def set(self, k: int, value: float) -> None:
        history = self._history(k)
        self.values[k] = value
        if k > 0:
            self.masses[k - 1] = self.values[k - 1] - value
        self.rates[k] = self._rate(k, value, history)

    def advance(self, k: int) -> float:
        """Trapezoidal predictor-corrector step to node k; returns x at node k."""
        history = self._history(k)
        prev, slope_prev = self.values[k - 1], self.rates[k - 1] / self.speed
        value = prev - self.step * slope_prev
        for _ in range(CORRECTOR_PASSES):
            value = prev - 0.5 * self.step * (slope_prev + self._rate(k, value, history) / self.speed)
        self.values[k] = value
        self.masses[k - 1] = prev - value
        self.rates[k] = self._rate(k, value, history)
        return value


def _march(marcher: _Marcher, start: int, limit: int, spec: GridSpec, plateau_len: int) -> Tuple[str, int]:
    """March nodes [start, limit) until the trajectory classifies itself."""
    run = 0
    for k in range(start, limit):
        x = marcher.advance(k)
        if x <= 0.0:
            return HIT, k
        slope = marcher.rates[k] / marcher.speed
        if slope < spec.slope_tol:
            if x <= spec.tol_zero:
                return PROPER, k
            run += 1
            if run >= plateau_len:
                return (IMPROPER if x > 10.0 * spec.tol_zero else AMBIGUOUS), k
        else:
            run = 0
    return AMBIGUOUS, limit - 1


def _march_result(
    marcher: _Marcher,
    outcome: str,
    k: int,
    origin: float,
    interior: int,
) -> Tuple[TailField, dict]:
    """Field and classification details of a finished march ending at node k."""
    step = marcher.step
    if outcome == HIT:
        count = k
        prev = marcher.values[k - 1]
        w_star = origin + step * (k - 1 + prev / (prev - marcher.values[k]))
        w_star = max(w_star, origin + step * (k - 1 + 1e-9))
        grid = np.append(origin + step * np.arange(count), w_star)
        values = np.append(marcher.values[:count], 0.0)
        info = {"hit_point": w_star}
    else:
        count = k + 1
        grid = origin + step * np.arange(count)
        values = marcher.values[:count].copy()
        info = {}
        if outcome == IMPROPER:
            info["eps_star"] = float(values[-1])
        else:
            values[-1] = 0.0

    uniform = np.minimum.accumulate(np.clip(marcher.values[:count], 0.0, 1.0))
    gc = GridCrossing(marcher.terms, step, count, 0.0)
    info["residual"] = gc.residual(uniform, marcher.speed, 1.0, max(1, interior), count - 1)
    if interior > 1:
        info["tail_residual"] = gc.residual(uniform, marcher.speed, 1.0, 1, interior)
    values = np.minimum.accumulate(np.clip(values, 0.0, 1.0))
    return TailField.linear(grid, values), info


def _speed_bounds(cfg: SystemConfig) -> Tuple[float, float]:
    """(sum_j sigma_j E min of d_j sizes, alpha * mean of the mixture marginal)."""
    low = math.fsum(c.sigma * ModelCore.expected_min(c.sizes, c.d) for c in cfg.classes if c.sigma > 0)
    high = math.fsum(c.sigma * c.d * ModelCore.marginal_mean(c.sizes) for c in cfg.classes if c.sigma > 0)
    return low, high


class _SpeedSearch:
    """Memoized shooting classifications of one free-frame config."""

    def __init__(self, cfg: SystemConfig, grid: GridSpec):
        self.cfg = cfg
        self.grid = grid
        self.results = {}
        self.labels = {}

    def classify(self, v: float) -> str:
        if v not in self.labels:
            try:
                fp = WaveSolver.defp_integrate(self.cfg, v, grid=self.grid)
                label = fp.classification.value
            except SolverError as e:
                if e.error_code != "CLASSIFICATION_AMBIGUOUS":
                    raise
                fp, label = None, AMBIGUOUS
            self.results[v] = fp
            self.labels[v] = label
            logger.debug("Speed probe v=%.6f -> %s", v, label)
        return self.labels[v]

    def probes(self) -> List[Tuple[float, str]]:
        return sorted(self.labels.items())

    def bisect(self, lo: float, hi: float, tol_v: float, is_low) -> Tuple[float, float]:
        while hi - lo > tol_v:
            mid = 0.5 * (lo + hi)
            if is_low(self.classify(mid)):
                lo = mid
            else:
                hi = mid
        return lo, hi


class WaveSolver:
    @staticmethod
    def beta_solve(cfg: SystemConfig, v: float) -> float:
        """The tail exponent: the root beta > 0 of alpha * Lbar(beta) = v for the mixture marginal."""
        validate_positive(v, "v", error_code="PARAM_RANGE")
        marginal = ModelCore.mixture_marginal(cfg)
        alpha = cfg.alpha
        mean = ModelCore.marginal_mean(marginal)
        if not alpha * mean > v:
            raise SolverError(
                f"no tail exponent: alpha*mean={alpha * mean:.6g} does not exceed v={v}",
                error_code="NO_ROOT",
                speed=v,
                details={"alpha": alpha, "mean": mean},
            )

        def gap(beta: float) -> float:
            return alpha * ModelCore.lbar(marginal, beta) - v

        hi = 1.0 / mean
        while gap(hi) > 0:
            hi *= 2.0
        return float(optimize.brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-12))

    @staticmethod
    def defp_integrate(
        cfg: SystemConfig,
        v: float,
        eps0: Optional[float] = None,
        w_span: Optional[float] = None,
        grid: Optional[GridSpec] = None,
    ) -> FixedPointResult:
        """
        Shoot the free fixed point at speed v from the exponential left tail
        1 - (1 - eps0) e^{beta w} (w <= 0) and classify where it goes: it
        hits the axis, decays to zero, or levels off at eps* > 0.

        An ambiguous outcome is retried once on a grid twice as fine.
        """
        spec = grid or GridSpec()
        eps0 = spec.eps0 if eps0 is None else eps0
        validate_probability(eps0, "eps0", closed_right=False)
        terms = CrossingCalculator.crossing_terms(cfg)
        beta = WaveSolver.beta_solve(cfg, v)

        for current in (spec, spec.refined(2.0)):
            result = WaveSolver._shoot(cfg, terms, v, beta, eps0, w_span, current)
            if result is not None:
                return result
            logger.debug("Ambiguous shooting outcome at v=%s; refining the grid", v)
        raise SolverError(
            f"cannot separate plateau from zero at v={v}",
            error_code="CLASSIFICATION_AMBIGUOUS",
            speed=v,
            details={"beta": beta, "tol_zero": spec.tol_zero},
        )

    @staticmethod
    def _shoot(
        cfg: SystemConfig,
        terms: List[CrossingTerm],
        v: float,
        beta: float,
        eps0: float,
        w_span: Optional[float],
        spec: GridSpec,
    ) -> Optional[FixedPointResult]:
        scale = terms_mean(terms)
        step = min(spec.shooting_step(scale), BETA_STEP / beta)
        w_start = math.log(spec.tail_tol / (1.0 - eps0)) / beta
        seeded = int(math.ceil(-w_start / step))
        span = w_span if w_span is not None else spec.march_span * (scale + 1.0 / beta)
        capacity = min(spec.max_points, seeded + 1 + int(math.ceil(span / step)))
        plateau_len = int(math.ceil(spec.plateau_spans / beta / step))

        origin = -seeded * step
        tail = 1.0 - (1.0 - eps0) * np.exp(beta * (origin + step * np.arange(seeded + 1)))
        marcher = _Marcher(terms, step, v, capacity, atom=1.0 - tail[0])
        for i, value in enumerate(tail):
            marcher.set(i, float(value))
        outcome, k = _march(marcher, seeded + 1, capacity, spec, plateau_len)
        if outcome == AMBIGUOUS:
            return None

        field, info = _march_result(marcher, outcome, k, origin, seeded)
        classification = Classification(outcome)
        if info["residual"] > spec.residual_tol:
            logger.warning("Shooting residual %.3g at v=%s exceeds %.3g", info["residual"], v, spec.residual_tol)
        result = FixedPointResult(
            field=field,
            speed=v,
            classification=classification,
            frame=Frame(),
            grid_step=step,
            residual=info["residual"],
            hit_point=info.get("hit_point"),
            eps_star=info.get("eps_star"),
            beta_used=beta,
            diagnostics={
                "eps0": eps0,
                "points": int(k + 1),
                "tail_residual": info.get("tail_residual"),
                "w_end": float(field.grid[-1]),
            },
        )
        logger.debug(
            "Shooting at v=%s: %s (w_end=%.3f, x_end=%.3g)", v, outcome, field.grid[-1], marcher.values[k]
        )
        return result

    @staticmethod
    def speed_range(
        cfg: SystemConfig,
        tol_v: float = 1e-3,
        grid: Optional[GridSpec] = None,
        cache_manager: Optional[CacheManager] = None,
    ) -> SpeedRange:
        """
        Bracket [v_min, v_max] by bisection over shooting classifications:
        hitting the axis means v < v_min, an improper tail means v > v_max.
        """
        validate_positive(tol_v, "tol_v", error_code="PARAM_RANGE")
        spec = grid or GridSpec()
        free = cfg.with_frame(Frame()).with_speed(0.0)
        active = [c for c in free.classes if c.sigma > 0]
        if active and all(c.k == c.d for c in active):
            v_star = _speed_bounds(free)[1]
            logger.warning("ANALYTIC_FALLBACK: every class has k=d; v*=%.6g", v_star)
            return SpeedRange(v_min=v_star, v_max=v_star, tol_v=tol_v, analytic_fallback=True)
        validated = ModelCore.validate_config(free)
        if not validated.exists_k_lt_d_nondegenerate:
            raise SolverError(
                "speed range needs a class with k < d and non-degenerate sizes",
                error_code="ASSUMPTION_VIOLATED",
                details=validated.to_dict()["flags"],
            )

        def compute() -> dict:
            return WaveSolver._bracket_speeds(free, tol_v, spec).to_dict()

        if cache_manager is None:
            return SpeedRange.from_dict(compute())
        key = free.cache_key("speed_range", tol_v, sorted(spec.to_dict().items()))
        return SpeedRange.from_dict(cache_manager.get_or_compute(key, compute, CacheManager.TTL_SPEED_RANGE))

    @staticmethod
    def _bracket_speeds(free: SystemConfig, tol_v: float, spec: GridSpec) -> SpeedRange:
        search = _SpeedSearch(free, spec)
        low, top = _speed_bounds(free)
        low *= 0.98
        for _ in range(LOWER_HALVINGS + 1):
            if search.classify(low) == HIT:
                break
            low *= 0.5
        else:
            raise SolverError(
                "no probe speed hits the axis",
                error_code="MAX_ITERS",
                details={"probes": search.probes()},
            )
        for fraction in UPPER_FRACTIONS:
            high = low + (top - low) * fraction
            if search.classify(high) == IMPROPER:
                break
        else:
            raise SolverError(
                f"no probe speed below alpha*mean={top:.6g} has an improper tail",
                error_code="MAX_ITERS",
                details={"probes": search.probes()},
            )

        labels = search.probes()
        first_free = min(v for v, label in labels if label != HIT)
        last_hit = max(v for v, label in labels if label == HIT and v < first_free)
        lower = search.bisect(last_hit, first_free, tol_v, lambda lb: lb == HIT)

        labels = search.probes()
        first_improper = min(v for v, label in labels if label == IMPROPER)
        below = max(v for v, label in labels if label != IMPROPER and v < first_improper)
        upper = search.bisect(below, first_improper, tol_v, lambda lb: lb != IMPROPER)

        v_min, v_max = 0.5 * sum(lower), 0.5 * sum(upper)
        if v_min > v_max:
            v_min = v_max = 0.5 * (v_min + v_max)
        result = SpeedRange(
            v_min=v_min,
            v_max=v_max,
            tol_v=tol_v,
            probes=search.probes(),
            lower_bracket=lower,
            upper_bracket=upper,
        )
        logger.info(
            "Speed range [%.6f, %.6f] from %d probes (lower %s, upper %s)",
            v_min,
            v_max,
            len(result.probes),
            lower,
            upper,
        )
        return result

    @staticmethod
    def free_fixed_point(
        cfg: SystemConfig,
        speed_range: Optional[SpeedRange] = None,
        tol_v: float = 1e-5,
        grid: Optional[GridSpec] = None,
    ) -> FixedPointResult:
        """
        The proper free fixed point at the lower end of the speed range: the
        shooting probe just below v_min, which follows the free shape until
        it drops to the axis far in its right tail. The probe's own
        classification stays in the diagnostics.
        """
        spec = grid or GridSpec()
        sr = speed_range or WaveSolver.speed_range(cfg, grid=spec)
        if sr.analytic_fallback or sr.lower_bracket is None:
            raise SolverError(
                "no shooting bracket: every class has k=d",
                error_code="ASSUMPTION_VIOLATED",
                details=sr.to_dict(),
            )
        free = cfg.with_frame(Frame()).with_speed(0.0)
        search = _SpeedSearch(free, spec)
        lo, hi = sr.lower_bracket
        if search.classify(lo) != HIT:
            raise SolverError(
                f"lower bracket end {lo} no longer hits the axis",
                error_code="CLASSIFICATION_AMBIGUOUS",
                speed=lo,
            )
        lo, hi = search.bisect(lo, hi, tol_v, lambda lb: lb == HIT)
        source = search.results[lo]
        speed = 0.5 * (lo + hi)
        result = FixedPointResult(
            field=source.field,
            speed=speed,
            classification=Classification.PROPER_FREE,
            frame=Frame(),
            grid_step=source.grid_step,
            residual=source.residual,
            beta_used=WaveSolver.beta_solve(free, speed),
            diagnostics={
                "source_speed": lo,
                "source_classification": source.classification.value,
                "approximate": source.classification != Classification.PROPER_FREE,
                "hit_point": source.hit_point,
                "lower_bracket": [lo, hi],
                "v_max": sr.v_max,
            },
        )
        logger.info("Free fixed point at v=%.6f (probe v=%.6f hits at w=%.3f)", speed, lo, source.hit_point)
        return result

    @staticmethod
    def wave_flux_identity(fp: FixedPointResult, cfg: SystemConfig) -> float:
        """Relative gap |v/lambda - int h dw| / (v/lambda) of a free fixed point."""
        if fp.classification != Classification.PROPER_FREE:
            raise SolverError(
                f"flux identity needs a proper free fixed point, got {fp.classification.value}",
                error_code="NOT_FREE_FP",
                speed=fp.speed,
            )
        terms = CrossingCalculator.crossing_terms(cfg)
        step = fp.grid_step
        start = float(fp.field.grid[0])
        end = float(fp.field.grid[-1]) + terms_support(terms, FLUX_SUPPORT_TAIL)
        nodes = start + step * np.arange(int(math.ceil((end - start) / step)) + 1)
        values = np.minimum.accumulate(np.asarray(fp.field.at(nodes)))
        rates = GridCrossing(terms, step, nodes.size, 0.5).rates(values, fp.field.x_minus_inf)
        integral = float(rates.sum()) * step / cfg.lam
        target = fp.speed / cfg.lam
        return abs(target - integral) / target

    @staticmethod
    def defp_from_boundary(
        cfg: SystemConfig, v: float, load: float, grid: Optional[GridSpec] = None
    ) -> FixedPointResult:
        """March the fixed-point ODE from the left boundary with an atom of 1 - load there."""
        validate_positive(v, "v", error_code="PARAM_RANGE")
        validate_probability(load, "load")
        spec = grid or GridSpec()
        origin = cfg.frame.left if math.isfinite(cfg.frame.left) else 0.0
        terms = CrossingCalculator.crossing_terms(cfg)
        scale = terms_mean(terms)
        try:
            beta = WaveSolver.beta_solve(cfg, v)
        except SolverError:
            beta = None
        step = spec.shooting_step(scale)
        length = scale
        if beta is not None:
            step = min(step, BETA_STEP / beta)
            length = 1.0 / beta
        span = spec.march_span * (scale + (1.0 / beta if beta else 0.0))
        capacity = min(spec.max_points, int(math.ceil(span / step)) + 1)
        plateau_len = int(math.ceil(spec.plateau_spans * length / step))

        marcher = _Marcher(terms, step, v, capacity, atom=1.0 - load)
        marcher.set(0, load)
        outcome, k = _march(marcher, 1, capacity, spec, plateau_len)
        if outcome == AMBIGUOUS:
            raise SolverError(
                f"boundary march at v={v}, load={load} does not classify",
                error_code="CLASSIFICATION_AMBIGUOUS",
                speed=v,
                details={"x_end": float(marcher.values[k])},
            )
        field, info = _march_result(marcher, outcome, k, origin, 0)
        classification = Classification.REGULATED if outcome == PROPER else Classification(outcome)
        return FixedPointResult(
            field=field,
            speed=v,
            classification=classification,
            frame=Frame(left=origin),
            grid_step=step,
            residual=info["residual"],
            load=load,
            hit_point=info.get("hit_point"),
            eps_star=info.get("eps_star"),
            beta_used=beta,
            diagnostics={"points": int(k + 1)},
        )

    @staticmethod
    def left_regulated_fp(
        cfg: SystemConfig,
        v: Optional[float] = None,
        v_max: Optional[float] = None,
        grid: Optional[GridSpec] = None,
        cross_check: bool = True,
        tol: float = 1e-6,
    ) -> FixedPointResult:
        """Unique left-regulated fixed point for v > v_max, by relaxation, cross-checked by boundary shooting."""
        if cfg.frame.kind != FrameKind.LEFT:
            raise ValidationError(
                "left-regulated fixed point needs a frame [A, inf)", field="frame", error_code="PARAM_RANGE"
            )
        v = cfg.speed if v is None else float(v)
        validate_positive(v, "v", error_code="PARAM_RANGE")
        if v_max is None:
            v_max = WaveSolver.speed_range(cfg, grid=grid).v_max
        if v <= v_max:
            raise SolverError(
                f"v={v} lies at or below v_max={v_max:.6g}",
                error_code="SPEED_IN_WAVE_RANGE",
                speed=v,
                details={"v_max": v_max},
            )
        cfg = cfg.with_speed(v)
        fp = MeanFieldSolver.ml_mfp(cfg, tol=tol, grid=grid)
        fp.diagnostics["v_max"] = v_max
        if cross_check:
            try:
                check = WaveSolver.defp_from_boundary(cfg, v, fp.load, grid=grid)
                fp.diagnostics["defp_levy"] = FieldCalculator.levy_distance(fp.field, check.field)
                fp.diagnostics["defp_classification"] = check.classification.value
            except SolverError as e:
                fp.diagnostics["defp_error"] = e.error_code
        return fp

    @staticmethod
    def load_curve(
        cfg: SystemConfig,
        v_list: Sequence[float],
        v_max: Optional[float] = None,
        grid: Optional[GridSpec] = None,
    ) -> List[Tuple[float, float]]:
        if v_max is None:
            v_max = WaveSolver.speed_range(cfg, grid=grid).v_max
        curve = []
        for v in sorted(v_list):
            fp = WaveSolver.left_regulated_fp(cfg, v, v_max=v_max, grid=grid, cross_check=False)
            curve.append((float(v), fp.load))
            logger.info("Load at v=%s: %.6f", v, fp.load)
        loads = [rho for _, rho in curve]
        if any(b >= a for a, b in zip(loads, loads[1:])):
            logger.warning("Load curve is not strictly decreasing: %s", curve)
        return curve

    @staticmethod
    def right_regulated_fp(
        cfg: SystemConfig,
        v: Optional[float] = None,
        v_min: Optional[float] = None,
        grid: Optional[GridSpec] = None,
        cross_check: bool = True,
        tol: float = 1e-6,
    ) -> FixedPointResult:
        """
        Right-regulated fixed point for v < v_min: the free shooting solution
        at v, which hits the axis, translated so the hitting point is B. With
        `cross_check` the maximal fixed point is relaxed as well and their Levy
        distance is recorded in the diagnostics.
        """
        frame = cfg.frame
        if frame.kind != FrameKind.RIGHT:
            raise ValidationError(
                "right-regulated fixed point needs a frame (-inf, B]", field="frame", error_code="PARAM_RANGE"
            )
        v = cfg.speed if v is None else float(v)
        validate_positive(v, "v", error_code="PARAM_RANGE")
        if v_min is None:
            v_min = WaveSolver.speed_range(cfg, grid=grid).v_min
        if v >= v_min:
            raise SolverError(
                f"v={v} lies at or above v_min={v_min:.6g}",
                error_code="SPEED_IN_WAVE_RANGE",
                speed=v,
                details={"v_min": v_min},
            )
        shot = WaveSolver.defp_integrate(cfg.with_frame(Frame()), v, grid=grid)
        if shot.classification != Classification.HIT_AXIS:
            raise SolverError(
                f"shooting at v={v} gives {shot.classification.value}, not a hitting solution",
                error_code="NO_PROPER_FP",
                speed=v,
            )
        shift = frame.right - shot.hit_point
        diagnostics = dict(shot.diagnostics)
        diagnostics.update({"shift": shift, "v_min": v_min})
        result = FixedPointResult(
            field=shot.field.shifted(shift),
            speed=v,
            classification=Classification.HIT_AXIS,
            frame=frame,
            grid_step=shot.grid_step,
            residual=shot.residual,
            hit_point=frame.right,
            beta_used=shot.beta_used,
            diagnostics=diagnostics,
        )
        if cross_check:
            try:
                relaxed = MeanFieldSolver.ml_mfp(cfg.with_speed(v), tol=tol, grid=grid)
                result.diagnostics["ml_mfp_levy"] = FieldCalculator.levy_distance(result.field, relaxed.field)
            except SolverError as e:
                result.diagnostics["ml_mfp_error"] = e.error_code
                logger.warning("Right-regulated cross-check at v=%s failed: %s", v, e.error_code)
        return result

    @staticmethod
    def uniqueness_probe(
        cfg: SystemConfig,
        v: Optional[float] = None,
        loads: Optional[Sequence[float]] = None,
        grid: Optional[GridSpec] = None,
    ) -> UniquenessProbe:
        """
        Shoot from the left boundary at loads around the relaxed load and
        report the right-tail level each reaches. Only probes uniqueness.
        """
        spec = grid or GridSpec()
        v = cfg.speed if v is None else float(v)
        cfg = cfg.with_speed(v)
        reference = MeanFieldSolver.ml_mfp(cfg, grid=spec).load
        if loads is None:
            loads = [min(reference * f, 1.0 - 1e-6) for f in UNIQUENESS_FACTORS]
        outcomes, levels = [], []
        for load in loads:
            try:
                fp = WaveSolver.defp_from_boundary(cfg, v, load, grid=spec)
                outcomes.append(fp.classification.value)
                if fp.classification == Classification.IMPROPER_RIGHT:
                    levels.append(fp.eps_star)
                elif fp.classification == Classification.REGULATED:
                    levels.append(0.0)
                else:
                    levels.append(None)
            except SolverError as e:
                if e.error_code != "CLASSIFICATION_AMBIGUOUS":
                    raise
                outcomes.append(AMBIGUOUS)
                levels.append(None)
        known = sorted(level for level in levels if level is not None)
        distinct = all(b - a > spec.tol_zero for a, b in zip(known, known[1:]))
        logger.info("Uniqueness probe at v=%s: %s", v, list(zip(loads, outcomes)))
        return UniquenessProbe(
            speed=v,
            reference_load=reference,
            loads=[float(x) for x in loads],
            outcomes=outcomes,
            tail_levels=levels,
            distinct_tail_levels=distinct,
        )

    @staticmethod
    def fixed_point(
        cfg: SystemConfig,
        v: Optional[float] = None,
        grid: Optional[GridSpec] = None,
        cache_manager: Optional[CacheManager] = None,
    ) -> FixedPointResult:
        """
        Fixed point for cfg's frame: two-sided relaxation, left or right
        regulation against the speed range, or free shooting (the free fixed
        point itself when no positive speed is given).
        """
        v = cfg.speed if v is None else float(v)
        kind = cfg.frame.kind
        if kind == FrameKind.FINITE:
            return MeanFieldSolver.two_sided_fp(cfg, v, grid=grid)
        if kind == FrameKind.FREE and v > 0:
            return WaveSolver.defp_integrate(cfg, v, grid=grid)
        sr = WaveSolver.speed_range(cfg, grid=grid, cache_manager=cache_manager)
        if kind == FrameKind.LEFT:
            return WaveSolver.left_regulated_fp(cfg, v, v_max=sr.v_max, grid=grid)
        if kind == FrameKind.RIGHT:
            return WaveSolver.right_regulated_fp(cfg, v, v_min=sr.v_min, grid=grid)
        return WaveSolver.free_fixed_point(cfg, speed_range=sr, grid=grid)
