"""
Event-driven simulator of the n-particle c.o.c. system.

Particles drift left at speed v (pinned at the left boundary) and jump when
selected by an arriving job. Arrivals are pre-drawn in blocks from a single
seeded generator, so identical seed and config replay identical trajectories.
"""

import csv
import logging
import math
import os
from typing import Callable, List, Optional, Sequence

import numpy as np

from models.sim_state import ArrivalEvent, SimState, StationarySample, VelocityEstimate
from models.system_config import SystemConfig
from models.tail_field import TailField
from services.field_calculus import FieldCalculator
from services.model_core import ModelCore
from services.statistics import batch_means, mean_ci, trend_test
from utils.errors import SimulationError, ValidationError
from utils.validators import validate_int_range, validate_positive, validate_probability

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["t", "quantile_05", "quantile_50", "quantile_95", "mean", "phi1", "busy_fraction"]


def _coc(W: np.ndarray, xi: np.ndarray, k: int, right_bound: float) -> np.ndarray:
    potentials = W + xi
    t_star = np.partition(potentials, k - 1, axis=-1)[..., k - 1 : k]
    new = np.maximum(W, np.minimum(potentials, t_star))
    if right_bound < math.inf:
        new = np.minimum(new, right_bound)
    return new


class EventStream:
    """Block pre-draws of arrival times, classes, selection uniforms and sizes."""

    def __init__(self, cfg: SystemConfig, n: int, rng: np.random.Generator, block: int = 4096):
        self.cfg = cfg
        self.rng = rng
        self.block = block
        self.total_rate = cfg.lam * n
        self.pi = np.asarray(cfg.pi, dtype=float)
        self.dbar = cfg.dbar
        self._pos = block
        self._size_pos = [block] * len(cfg.classes)
        self._sizes: List[Optional[np.ndarray]] = [None] * len(cfg.classes)

    def _refill(self) -> None:
        self._dts = self.rng.exponential(1.0 / self.total_rate, size=self.block)
        self._cls = self.rng.choice(self.pi.size, size=self.block, p=self.pi)
        self._unif = self.rng.random((self.block, self.dbar))
        self._pos = 0

    def _next_sizes(self, j: int) -> np.ndarray:
        if self._size_pos[j] >= self.block:
            cls = self.cfg.classes[j]
            self._sizes[j] = ModelCore.sample_block(cls.sizes, cls.d, self.rng, self.block)
            self._size_pos[j] = 0
        row = self._sizes[j][self._size_pos[j]]
        self._size_pos[j] += 1
        return row

    def next_event(self) -> ArrivalEvent:
        if self._pos >= self.block:
            self._refill()
        i = self._pos
        self._pos += 1
        j = int(self._cls[i])
        return ArrivalEvent(
            dt=float(self._dts[i]),
            cls_index=j,
            uniforms=self._unif[i, : self.cfg.classes[j].d],
            sizes=self._next_sizes(j),
        )


class SimulationRunner:
    """Drives a SimState through an EventStream up to given clock times."""

    def __init__(self, state: SimState, cfg: SystemConfig, rng: np.random.Generator):
        self.state = state
        self.cfg = cfg
        self.stream = EventStream(cfg, state.n, rng)
        self._pending = self.stream.next_event()
        self._pending_time = state.clock + self._pending.dt

    def run_until(self, t: float, observer: Optional[Callable[[SimState], None]] = None) -> SimState:
        while self._pending_time <= t:
            self.state.clock = self._pending_time
            ParticleSimulator.apply_event(self.state, self.cfg, self._pending, advance_clock=False)
            if observer is not None:
                observer(self.state)
            self._pending = self.stream.next_event()
            self._pending_time = self.state.clock + self._pending.dt
        ParticleSimulator.advance(self.state, t - self.state.clock)
        return self.state


class ParticleSimulator:
    @staticmethod
    def coc_jump(W: Sequence[float], xi: Sequence[float], k: int, right_bound: float = math.inf) -> np.ndarray:
        """
        Cancel-on-completion jump of the d selected particles.

        Potentials P = W + xi; the job completes at T*, the k-th smallest
        potential; each particle moves to max(W, min(P, T*)), then is clamped
        at the right boundary.
        """
        W = np.asarray(W, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if W.shape != xi.shape or W.ndim != 1:
            raise ValidationError("positions and sizes must be vectors of equal length", field="xi")
        if np.any(xi < 0):
            raise SimulationError("component sizes must be non-negative", error_code="NEGATIVE_SIZE")
        if not 1 <= k <= W.size:
            raise ValidationError(
                f"k={k} must lie in [1, {W.size}]", field="k", error_code="K_EXCEEDS_D"
            )
        return _coc(W, xi, k, right_bound)

    @staticmethod
    def coc_jump_batch(W: np.ndarray, xi: np.ndarray, k: int, right_bound: float = math.inf) -> np.ndarray:
        """Row-wise coc_jump on (m, d) arrays."""
        return _coc(np.asarray(W, dtype=float), np.asarray(xi, dtype=float), k, right_bound)

    # state handling

    @staticmethod
    def initial_state(cfg: SystemConfig, n: int, positions: Optional[Sequence[float]] = None) -> SimState:
        validate_int_range(n, "n", min_value=1)
        if n < cfg.dbar:
            raise SimulationError(
                f"n={n} is smaller than the largest selection size {cfg.dbar}",
                error_code="N_TOO_SMALL",
                details={"n": n, "dbar": cfg.dbar},
            )
        frame = cfg.frame
        if positions is None:
            start = frame.left if math.isfinite(frame.left) else (frame.right if math.isfinite(frame.right) else 0.0)
            pos = np.full(n, start, dtype=float)
        else:
            pos = np.asarray(positions, dtype=float).copy()
            if pos.size != n:
                raise ValidationError("initial positions must have length n", field="positions")
            if np.any(pos < frame.left) or np.any(pos > frame.right):
                raise ValidationError("initial positions must lie in the frame", field="positions")
        return SimState(
            positions=pos,
            stamps=np.zeros(n),
            clock=0.0,
            frame=frame,
            speed=cfg.speed,
            perm=np.arange(n),
            arrivals=np.zeros(len(cfg.classes), dtype=np.int64),
        )

    @staticmethod
    def advance(state: SimState, dt: float) -> SimState:
        """Move the clock; drift is applied lazily on evaluation."""
        validate_positive(dt, "dt", allow_zero=True)
        state.clock += dt
        return state

    @staticmethod
    def apply_event(state: SimState, cfg: SystemConfig, event: ArrivalEvent, advance_clock: bool = True) -> SimState:
        if advance_clock:
            state.clock += event.dt
        cls = cfg.classes[event.cls_index]
        perm = state.perm
        n = perm.size
        # partial Fisher-Yates: first d entries of perm become the selection
        for i in range(cls.d):
            r = i + int(event.uniforms[i] * (n - i))
            perm[i], perm[r] = perm[r], perm[i]
        sel = perm[: cls.d].copy()
        old = state.positions_at(sel)
        new = _coc(old, event.sizes, cls.k, state.frame.right)
        state.positions[sel] = new
        state.stamps[sel] = state.clock
        state.total_displacement += float(np.sum(new - old))
        state.arrivals[event.cls_index] += 1
        state.events += 1
        return state

    @staticmethod
    def step(state: SimState, cfg: SystemConfig, rng: np.random.Generator) -> SimState:
        """One arrival drawn directly from `rng` (use SimulationRunner for long runs)."""
        if state.n < cfg.dbar:
            raise SimulationError("n is smaller than the largest selection size", error_code="N_TOO_SMALL")
        dt = float(rng.exponential(1.0 / (cfg.lam * state.n)))
        j = int(rng.choice(len(cfg.classes), p=np.asarray(cfg.pi)))
        cls = cfg.classes[j]
        event = ArrivalEvent(
            dt=dt,
            cls_index=j,
            uniforms=rng.random(cls.d),
            sizes=ModelCore.sample_components(cls, rng),
        )
        return ParticleSimulator.apply_event(state, cfg, event)

    # measurements

    @staticmethod
    def default_burn_in(cfg: SystemConfig, n: int) -> float:
        """10 n / lambda; a heuristic only, no mixing-time bound backs it."""
        return 10.0 * n / cfg.lam

    @staticmethod
    def estimate_vn(
        cfg: SystemConfig,
        n: int,
        horizon: float,
        burn_in: Optional[float] = None,
        nu: float = 0.5,
        rng: Optional[np.random.Generator] = None,
        batches: int = 20,
    ) -> VelocityEstimate:
        """
        Advance velocity of the free system: nu-quantile and mean
        displacement rates over [burn_in, horizon] with batch-means CIs.
        """
        if not cfg.frame.is_free:
            raise SimulationError("velocity estimation needs a free frame", error_code="FRAME_NOT_FREE")
        if cfg.speed != 0:
            raise ValidationError("velocity estimation runs with v = 0", field="speed", error_code="PARAM_RANGE")
        validate_probability(nu, "nu")
        validate_int_range(batches, "batches", min_value=2)
        burn_in = ParticleSimulator.default_burn_in(cfg, n) if burn_in is None else burn_in
        if not horizon > burn_in:
            raise ValidationError("horizon must exceed burn-in", field="horizon", error_code="PARAM_RANGE")
        rng = rng or np.random.default_rng()

        runner = SimulationRunner(ParticleSimulator.initial_state(cfg, n), cfg, rng)
        times = burn_in + (horizon - burn_in) * np.arange(batches + 1) / batches
        quantiles, means, spreads = [], [], []
        for t in times:
            pos = runner.run_until(float(t)).current_positions()
            quantiles.append(FieldCalculator.inverse(FieldCalculator.from_samples(pos), nu))
            m = float(pos.mean())
            means.append(m)
            spreads.append(float(np.mean(np.abs(pos - m))))

        length = (horizon - burn_in) / batches
        q_rates = np.diff(quantiles) / length
        m_rates = np.diff(means) / length
        slope, pvalue = trend_test(times, spreads)
        suspect = bool(slope > 0 and pvalue < 0.01 and spreads[-1] > 2.0 * max(spreads[0], 1e-12))
        if suspect:
            logger.warning("Configuration spread grows over the run (n=%d); recurrence is doubtful", n)

        estimate = VelocityEstimate(
            quantile_rate=float((quantiles[-1] - quantiles[0]) / (horizon - burn_in)),
            quantile_half_width=mean_ci(q_rates)[1],
            mean_rate=float((means[-1] - means[0]) / (horizon - burn_in)),
            mean_half_width=mean_ci(m_rates)[1],
            nu=nu,
            horizon=horizon,
            burn_in=burn_in,
            n=n,
            batches=batches,
            recurrence_suspect=suspect,
        )
        logger.info(
            "v_n estimate n=%d: quantile %.5f +- %.5f, mean %.5f +- %.5f",
            n,
            estimate.quantile_rate,
            estimate.quantile_half_width,
            estimate.mean_rate,
            estimate.mean_half_width,
        )
        return estimate

    @staticmethod
    def stationary_sample(
        cfg: SystemConfig,
        n: int,
        burn_in: Optional[float],
        window: float,
        stride: float,
        rng: np.random.Generator,
        centered: Optional[bool] = None,
        batches: int = 20,
    ) -> StationarySample:
        """
        Snapshots of the empirical field at burn_in + i*stride for i*stride <= window.
        Free-frame snapshots are centered.
        """
        frame = cfg.frame
        if not frame.is_free:
            validate_positive(cfg.speed, "speed", error_code="PARAM_RANGE")
        centered = frame.is_free if centered is None else centered
        burn_in = ParticleSimulator.default_burn_in(cfg, n) if burn_in is None else burn_in
        validate_positive(stride, "stride")
        validate_positive(window, "window", allow_zero=True)

        runner = SimulationRunner(ParticleSimulator.initial_state(cfg, n), cfg, rng)
        count = int(math.floor(window / stride + 1e-9)) + 1
        times = [burn_in + i * stride for i in range(count)]
        snapshots, phi1, busy, pooled = [], [], [], []
        for t in times:
            pos = runner.run_until(t).current_positions()
            m = float(pos.mean())
            if centered:
                pos = pos - m
                m = 0.0
            snapshots.append(FieldCalculator.from_samples(pos))
            pooled.append(pos)
            phi1.append(float(np.mean(np.abs(pos - m))))
            if math.isfinite(frame.left):
                busy.append(float(np.mean(pos > frame.left)))

        phi1_arr = np.asarray(phi1)
        unstable = False
        if frame.kind.value != "finite" and count >= 3:
            slope, pvalue = trend_test(times, phi1_arr)
            growth = slope * (times[-1] - times[0])
            unstable = bool(pvalue < 0.01 and growth > 0.5 * max(phi1_arr.mean(), 1e-12))
            if unstable:
                logger.warning("UNSTABLE_SUSPECTED: Phi_1 grows by %.3g over the window (n=%d)", growth, n)

        phi1_mean, phi1_hw = batch_means(phi1_arr, batches)
        busy_mean = busy_hw = None
        if busy:
            busy_mean, busy_hw = batch_means(busy, batches)

        return StationarySample(
            snapshots=snapshots,
            times=times,
            pooled=FieldCalculator.from_samples(np.concatenate(pooled)),
            phi1_mean=phi1_mean,
            phi1_half_width=phi1_hw,
            phi1_series=phi1,
            busy_fraction=busy_mean,
            busy_half_width=busy_hw,
            centered=centered,
            unstable_suspected=unstable,
        )

    @staticmethod
    def record_trajectory(
        cfg: SystemConfig,
        n: int,
        horizon: float,
        record_every: float,
        rng: np.random.Generator,
        snapshot_dir: Optional[str] = None,
    ) -> List[dict]:
        """Summary rows (quantiles, mean, Phi_1, busy fraction) every `record_every` time units."""
        validate_positive(horizon, "horizon")
        validate_positive(record_every, "record_every")
        runner = SimulationRunner(ParticleSimulator.initial_state(cfg, n), cfg, rng)
        rows = []
        steps = int(math.floor(horizon / record_every + 1e-9))
        for i in range(steps + 1):
            t = i * record_every
            pos = runner.run_until(t).current_positions()
            field = FieldCalculator.from_samples(pos)
            m = float(pos.mean())
            rows.append(
                {
                    "t": t,
                    "quantile_05": float(np.quantile(pos, 0.05)),
                    "quantile_50": float(np.quantile(pos, 0.5)),
                    "quantile_95": float(np.quantile(pos, 0.95)),
                    "mean": m,
                    "phi1": float(np.mean(np.abs(pos - m))),
                    "busy_fraction": float(np.mean(pos > cfg.frame.left)) if math.isfinite(cfg.frame.left) else None,
                }
            )
            if snapshot_dir:
                os.makedirs(snapshot_dir, exist_ok=True)
                FieldCalculator.to_csv(field, os.path.join(snapshot_dir, f"snapshot_{i:06d}.csv"))
        logger.info("Recorded %d trajectory rows (n=%d, horizon=%s)", len(rows), n, horizon)
        return rows

    @staticmethod
    def write_trajectory_csv(rows: List[dict], out) -> None:
        writer = csv.DictWriter(out, fieldnames=TRAJECTORY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row[k] is None else repr(row[k])) for k in TRAJECTORY_COLUMNS})
