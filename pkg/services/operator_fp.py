"""
The single-particle environment operator and structural checks.

`opfp_apply` follows one tagged particle in a frozen environment x: it
drifts left at speed v (held at the left boundary), and at rate alpha it
is selected by a job whose other d_j - 1 particles are drawn i.i.d. from
x. Its long-run occupation measure, as a tail field, is the image of x;
fixed points of the mean field are exactly the fields it reproduces.
"""

import itertools
import logging
import math
from typing import Optional, Sequence

import numpy as np

from models.fixed_point import DMonotonicityCell, DMonotonicityReport
from models.system_config import Frame, JobClass, SystemConfig
from models.tail_field import TailField
from services.field_calculus import FieldCalculator
from services.model_core import ModelCore
from services.particle_sim import ParticleSimulator
from services.statistics import mean_ci
from utils.errors import SolverError, ValidationError
from utils.validators import validate_int_range, validate_positive

logger = logging.getLogger(__name__)

BURN_IN_FRACTION = 0.05
HALF_LEVY_TOL = 0.05
MAX_LATTICE_CELLS = 4096


def _sum_positive_part(points: np.ndarray, w: np.ndarray) -> np.ndarray:
    """sum_i (w - points_i)^+ for every w."""
    ordered = np.sort(points)
    csum = np.concatenate(([0.0], np.cumsum(ordered)))
    idx = np.searchsorted(ordered, w, side="right")
    return idx * w - csum[idx]


def _occupation(
    starts: np.ndarray, ends: np.ndarray, pinned: float, left: float, speed: float, durations: np.ndarray, w: np.ndarray
) -> np.ndarray:
    """Time spent at or left of each level w."""
    if speed > 0:
        occ = (_sum_positive_part(ends, w) - _sum_positive_part(starts, w)) / speed
    else:
        order = np.argsort(starts)
        csum = np.concatenate(([0.0], np.cumsum(durations[order])))
        occ = csum[np.searchsorted(starts[order], w, side="right")]
    if pinned > 0:
        occ = occ + np.where(w >= left, pinned, 0.0)
    return occ


class OperatorOracle:
    @staticmethod
    def _companion_thresholds(x: TailField, cfg: SystemConfig, rng: np.random.Generator, events: int):
        """Per event: tagged size and the k-th smallest companion potential (inf when k = d)."""
        shares = np.array([c.sigma * c.d for c in cfg.classes], dtype=float)
        cls_idx = rng.choice(len(cfg.classes), size=events, p=shares / shares.sum())
        tagged = np.empty(events)
        threshold = np.full(events, math.inf)
        for j, cls in enumerate(cfg.classes):
            mask = cls_idx == j
            count = int(mask.sum())
            if count == 0:
                continue
            sizes = ModelCore.sample_block(cls.sizes, cls.d, rng, count)
            tagged[mask] = sizes[:, 0]
            if cls.k <= cls.d - 1:
                loc = FieldCalculator.inverse(x, rng.random((count, cls.d - 1)))
                with np.errstate(invalid="ignore"):
                    potentials = np.asarray(loc) + sizes[:, 1:]
                potentials = np.nan_to_num(potentials, nan=math.inf)
                threshold[mask] = np.partition(potentials, cls.k - 1, axis=1)[:, cls.k - 1]
        return tagged, threshold

    @staticmethod
    def opfp_apply(
        x: TailField,
        cfg: SystemConfig,
        v: Optional[float] = None,
        frame: Optional[Frame] = None,
        rng: Optional[np.random.Generator] = None,
        events: int = 10**6,
        grid_points: int = 2001,
    ) -> TailField:
        """Occupation tail of a tagged particle in environment x (after a short burn-in)."""
        v = cfg.speed if v is None else float(v)
        frame = frame or cfg.frame
        validate_positive(v, "v", allow_zero=True, error_code="PARAM_RANGE")
        validate_int_range(events, "events", min_value=100)
        if not frame.is_free and v <= 0:
            raise ValidationError("a regulated frame needs a positive drift", field="v", error_code="PARAM_RANGE")
        rng = rng or np.random.default_rng()

        times = rng.exponential(1.0 / cfg.alpha, size=events)
        tagged, threshold = OperatorOracle._companion_thresholds(x, cfg, rng, events)
        left, right = frame.left, frame.right

        start = float(FieldCalculator.inverse(x, 0.5, floor=left))
        if not math.isfinite(start):
            start = left if math.isfinite(left) else (right if math.isfinite(right) else 0.0)
        position = min(max(start, left), right)

        starts = np.empty(events)
        ends = np.empty(events)
        pinned = np.zeros(events)
        for i in range(events):
            starts[i] = position
            end = position - v * times[i]
            if end < left:
                pinned[i] = times[i] - (position - left) / v
                end = left
            ends[i] = end
            position = max(end, min(end + tagged[i], threshold[i]))
            if position > right:
                position = right

        burn = int(events * BURN_IN_FRACTION)
        keep = slice(burn, events)
        image = OperatorOracle._image(x, starts[keep], ends[keep], pinned[keep], times[keep], left, v, grid_points)

        half = burn + (events - burn) // 2
        halves = [slice(burn, half), slice(half, events)]
        first, second = (
            OperatorOracle._image(x, starts[s], ends[s], pinned[s], times[s], left, v, grid_points) for s in halves
        )
        levy = FieldCalculator.levy_distance(first, second)
        shift = abs(OperatorOracle._occupation_mean(first) - OperatorOracle._occupation_mean(second))
        spread = OperatorOracle._occupation_spread(first) + OperatorOracle._occupation_spread(second)
        if levy > HALF_LEVY_TOL or shift > 0.5 * spread:
            raise SolverError(
                "occupation measure does not settle",
                error_code="NONCONVERGED",
                speed=v,
                details={"half_levy": levy, "mean_shift": shift, "spread": spread},
            )
        logger.debug("Operator image over %d events: half-split Levy %.4f", events - burn, levy)
        return image

    @staticmethod
    def _image(x, starts, ends, pinned, durations, left, speed, grid_points) -> TailField:
        total = float(durations.sum())
        lo = float(min(ends.min(), starts.min()))
        hi = float(max(starts.max(), ends.max()))
        if hi <= lo:
            hi = lo + 1.0
        w = np.linspace(lo, hi, grid_points)
        occ = _occupation(starts, ends, float(pinned.sum()), left, speed, durations, w)
        values = np.clip(1.0 - occ / total, 0.0, 1.0)
        values = x.x_inf + x.finite_mass * np.minimum.accumulate(values)
        return TailField.linear(w, values, x_minus_inf=x.x_minus_inf)

    @staticmethod
    def _occupation_mean(x: TailField) -> float:
        loc, mass = x.atoms()
        a, b, seg = x.segments()
        total = float(mass.sum() + seg.sum())
        return float((np.dot(loc, mass) + np.dot(0.5 * (a + b), seg)) / total) if total > 0 else 0.0

    @staticmethod
    def _occupation_spread(x: TailField) -> float:
        m = OperatorOracle._occupation_mean(x)
        loc, mass = x.atoms()
        a, b, seg = x.segments()
        total = float(mass.sum() + seg.sum())
        if total <= 0:
            return 0.0
        return float((np.dot(np.abs(loc - m), mass) + np.dot(np.abs(0.5 * (a + b) - m), seg)) / total)


class StructureChecker:
    @staticmethod
    def d_monotonicity_check(
        cls: JobClass,
        gap_grid: Sequence[float],
        samples: int = 20_000,
        rng: Optional[np.random.Generator] = None,
    ) -> DMonotonicityReport:
        """
        Monte-Carlo E eta(D), the total displacement of one job's selected
        particles at gap vector D, over the lattice gap_grid^(d-1), with
        common random numbers across cells. Flags increases along any
        coordinate that exceed the paired-difference CI.
        """
        if cls.d < 2:
            raise ValidationError("D-monotonicity needs d >= 2", field="d", error_code="PARAM_RANGE")
        validate_int_range(samples, "samples", min_value=2)
        grid = sorted(float(g) for g in gap_grid)
        if not grid or grid[0] < 0:
            raise ValidationError(
                "gap grid must be non-empty and non-negative", field="gap_grid", error_code="PARAM_RANGE"
            )
        if len(grid) ** (cls.d - 1) > MAX_LATTICE_CELLS:
            raise ValidationError(
                f"lattice of {len(grid)}^{cls.d - 1} cells exceeds {MAX_LATTICE_CELLS}",
                field="gap_grid",
                error_code="PARAM_RANGE",
            )
        rng = rng or np.random.default_rng()
        sizes = ModelCore.sample_block(cls.sizes, cls.d, rng, samples)

        lattice = list(itertools.product(grid, repeat=cls.d - 1))
        draws = {}
        cells = []
        for gaps in lattice:
            positions = np.concatenate(([0.0], np.cumsum(gaps)))
            start = np.broadcast_to(positions, sizes.shape)
            moved = ParticleSimulator.coc_jump_batch(start, sizes, cls.k)
            eta = (moved - start).sum(axis=1)
            draws[gaps] = eta
            mean, hw = mean_ci(eta)
            cells.append(DMonotonicityCell(gaps=gaps, mean=mean, half_width=hw))

        violations = []
        index = {g: i for i, g in enumerate(grid)}
        for gaps in lattice:
            for axis in range(cls.d - 1):
                i = index[gaps[axis]]
                if i + 1 == len(grid):
                    continue
                wider = gaps[:axis] + (grid[i + 1],) + gaps[axis + 1 :]
                diff, hw = mean_ci(draws[wider] - draws[gaps])
                if diff - hw > 0:
                    violations.append((gaps, wider, diff))

        means = [c.mean for c in cells]
        widest = max(c.half_width for c in cells)
        report = DMonotonicityReport(
            d=cls.d,
            k=cls.k,
            samples=samples,
            cells=cells,
            violations=violations,
            is_d_monotone=not violations,
            is_work_conserving=max(means) - min(means) <= 2.0 * widest,
        )
        if violations:
            logger.warning("D-monotonicity violated in %d of %d lattice steps", len(violations), len(lattice))
        return report
