"""
Theory-versus-simulation experiments.

Each experiment fans seeded replicas out over a process pool, reduces
them single-threaded into cells and judges the cells against solver
reference values embedded in the report.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence

import numpy as np

from models.experiment import AssertionResult, ExperimentKind, ExperimentReport, ExperimentSpec
from models.system_config import FrameKind, SystemConfig
from models.tail_field import TailField
from services.field_calculus import FieldCalculator
from services.model_core import ModelCore
from services.particle_sim import ParticleSimulator
from services.statistics import mean_ci, mean_diff_ci, replica_seeds
from services.wave_solver import WaveSolver
from utils.errors import ExperimentError, ValidationError
from utils.settings import VERSION

logger = logging.getLogger(__name__)

FLUX_TOL = 1e-2


def _vn_replica(cfg: dict, n: int, horizon: float, burn_in: float, nu: float, batches: int, seed) -> dict:
    rng = np.random.default_rng(seed)
    est = ParticleSimulator.estimate_vn(SystemConfig.from_dict(cfg), n, horizon, burn_in, nu, rng, batches)
    return est.to_dict()


def _stationary_replica(
    cfg: dict, n: int, burn_in: float, window: float, stride: float, batches: int, seed
) -> dict:
    rng = np.random.default_rng(seed)
    sample = ParticleSimulator.stationary_sample(
        SystemConfig.from_dict(cfg), n, burn_in, window, stride, rng, batches=batches
    )
    return sample.to_dict()


def _fan_out(fn: Callable, jobs: List[tuple], workers: int) -> List[dict]:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _ci_entry(values: Sequence[float]) -> tuple:
    mean, hw = mean_ci(values)
    return mean, (hw if math.isfinite(hw) else None)


class ExperimentRunner:
    @staticmethod
    def _report(spec: ExperimentSpec, cell_keys: List[str]) -> ExperimentReport:
        provenance = spec.provenance()
        provenance["version"] = VERSION
        return ExperimentReport(
            experiment=spec.kind.value,
            config_hash=spec.config.config_hash(),
            seed=spec.seed,
            cell_keys=cell_keys,
            provenance=provenance,
        )

    @staticmethod
    def _stationary_cells(spec: ExperimentSpec, cfg: SystemConfig, cell_offset: int = 0) -> List[List[dict]]:
        """Replica samples per n, one cell index per (speed, n) pair."""
        out = []
        for c, n in enumerate(spec.n_list):
            seeds = replica_seeds(spec.seed, cell_offset + c, spec.replicas)
            jobs = [
                (cfg.to_dict(), n, spec.burn_in, spec.window, spec.stride, spec.batches, s) for s in seeds
            ]
            out.append(_fan_out(_stationary_replica, jobs, spec.workers))
        return out

    @staticmethod
    def run_vn_convergence(spec: ExperimentSpec) -> ExperimentReport:
        """Velocity estimates v_n against the solver's speed range."""
        cfg = spec.config
        if not cfg.frame.is_free or cfg.speed != 0:
            raise ValidationError(
                "velocity convergence runs a free system with v = 0", field="config", error_code="PARAM_RANGE"
            )
        report = ExperimentRunner._report(spec, ["n"])
        sr = WaveSolver.speed_range(cfg, tol_v=spec.tol_v, grid=spec.grid)
        ihr = ModelCore.validate_config(cfg).all_iid_ihr
        report.references = {"speed_range": sr.to_dict(), "all_iid_ihr": ihr}

        for c, n in enumerate(spec.n_list):
            seeds = replica_seeds(spec.seed, c, spec.replicas)
            jobs = [(cfg.to_dict(), n, spec.horizon, spec.burn_in, spec.nu, spec.batches, s) for s in seeds]
            estimates = _fan_out(_vn_replica, jobs, spec.workers)
            q_rates = [e["quantile_rate"] for e in estimates]
            m_rates = [e["mean_rate"] for e in estimates]
            q_mean, q_hw = _ci_entry(q_rates)
            m_mean, m_hw = _ci_entry(m_rates)
            if q_hw is None:
                q_hw, m_hw = estimates[0]["quantile_half_width"], estimates[0]["mean_half_width"]
            cell = {
                "n": n,
                "quantile_rate": q_mean,
                "quantile_half_width": q_hw,
                "mean_rate": m_mean,
                "mean_half_width": m_hw,
                "v_min": sr.v_min,
                "v_max": sr.v_max,
                "recurrence_suspect": any(e["recurrence_suspect"] for e in estimates),
            }
            if spec.replicas >= 4:
                half = spec.replicas // 2
                diff, hw = mean_diff_ci(m_rates[:half], m_rates[half:])
                cell["split_half_gap"] = diff
                cell["split_half_half_width"] = hw
                report.assertions.append(
                    AssertionResult(f"split_halves_agree[n={n}]", abs(diff) <= hw, f"gap={diff:.5f} hw={hw:.5f}")
                )
            report.cells.append(cell)
            logger.info("v_n cell n=%d: quantile %.5f +- %.5f", n, q_mean, q_hw)

        if ihr:
            target = sr.v_star
            for prev, cur in zip(report.cells, report.cells[1:]):
                gap_prev = abs(prev["quantile_rate"] - target)
                gap_cur = abs(cur["quantile_rate"] - target)
                slack = prev["quantile_half_width"] + cur["quantile_half_width"]
                report.assertions.append(
                    AssertionResult(
                        f"monotone_approach[n={prev['n']}->{cur['n']}]",
                        gap_cur <= gap_prev + slack,
                        f"gap {gap_prev:.5f} -> {gap_cur:.5f} (slack {slack:.5f})",
                    )
                )
        return report

    @staticmethod
    def _ssai(spec: ExperimentSpec, left: bool) -> ExperimentReport:
        cfg = spec.config
        want = FrameKind.LEFT if left else FrameKind.RIGHT
        if cfg.frame.kind != want:
            raise ValidationError(f"experiment needs a {want.value} frame", field="frame", error_code="PARAM_RANGE")
        report = ExperimentRunner._report(spec, ["n"])
        sr = WaveSolver.speed_range(cfg, tol_v=spec.tol_v, grid=spec.grid)
        if left:
            fp = WaveSolver.left_regulated_fp(cfg, v_max=sr.v_max, grid=spec.grid, cross_check=False)
        else:
            fp = WaveSolver.right_regulated_fp(cfg, v_min=sr.v_min, grid=spec.grid)
        report.references = {"speed_range": sr.to_dict(), "fixed_point": fp.sidecar()}

        for n, samples in zip(spec.n_list, ExperimentRunner._stationary_cells(spec, cfg)):
            distances = [FieldCalculator.levy_distance(TailField.from_dict(s["pooled"]), fp.field) for s in samples]
            levy, levy_hw = _ci_entry(distances)
            cell = {"n": n, "levy": levy, "levy_half_width": levy_hw}
            if left:
                busy, busy_hw = _ci_entry([s["busy_fraction"] for s in samples])
                cell.update({"busy_fraction": busy, "busy_half_width": busy_hw, "load": fp.load})
            cell["unstable_suspected"] = any(s["unstable_suspected"] for s in samples)
            report.cells.append(cell)
            logger.info("SSAI cell n=%d: Levy distance %.4f", n, levy)

        levys = [c["levy"] for c in report.cells]
        report.assertions.append(
            AssertionResult(
                "levy_decreasing_in_n",
                all(b < a for a, b in zip(levys, levys[1:])),
                f"levy={[round(x, 5) for x in levys]}",
            )
        )
        report.assertions.append(
            AssertionResult("levy_final_within_tol", levys[-1] <= spec.levy_tol, f"{levys[-1]:.5f} <= {spec.levy_tol}")
        )
        if left:
            busy = report.cells[-1]["busy_fraction"]
            report.assertions.append(
                AssertionResult(
                    "busy_fraction_matches_load",
                    abs(busy - fp.load) <= spec.busy_tol,
                    f"busy={busy:.5f} load={fp.load:.5f}",
                )
            )
        return report

    @staticmethod
    def run_ssai_left(spec: ExperimentSpec) -> ExperimentReport:
        """Stationary empirical fields of the left-regulated system against the relaxed fixed point."""
        return ExperimentRunner._ssai(spec, left=True)

    @staticmethod
    def run_ssai_right(spec: ExperimentSpec) -> ExperimentReport:
        return ExperimentRunner._ssai(spec, left=False)

    @staticmethod
    def run_phi1_bound(spec: ExperimentSpec) -> ExperimentReport:
        """E Phi_1 of stationary fields over an (n, v) grid; flags growth in n at fixed v."""
        cfg = spec.config
        if cfg.frame.kind not in (FrameKind.LEFT, FrameKind.RIGHT):
            raise ValidationError("Phi_1 bound needs a one-sided frame", field="frame", error_code="PARAM_RANGE")
        report = ExperimentRunner._report(spec, ["v", "n"])
        speeds = spec.speeds or (cfg.speed,)
        report.references = {"speeds": list(speeds)}

        for i, v in enumerate(speeds):
            framed = cfg.with_speed(v)
            offset = i * len(spec.n_list)
            rows = []
            for n, samples in zip(spec.n_list, ExperimentRunner._stationary_cells(spec, framed, offset)):
                phi1, phi1_hw = _ci_entry([s["phi1_mean"] for s in samples])
                if phi1_hw is None:
                    phi1_hw = samples[0]["phi1_half_width"]
                unstable = any(s["unstable_suspected"] for s in samples)
                row = {"v": v, "n": n, "phi1": phi1, "phi1_half_width": phi1_hw, "unstable_suspected": unstable}
                report.cells.append(row)
                if unstable:
                    logger.warning("UNSTABLE_SUSPECTED at v=%s n=%d; cell excluded", v, n)
                else:
                    rows.append(row)
            if len(rows) >= 2:
                first, last = rows[0], rows[-1]
                slack = first["phi1_half_width"] + last["phi1_half_width"]
                report.assertions.append(
                    AssertionResult(
                        f"phi1_no_upward_trend[v={v}]",
                        last["phi1"] <= first["phi1"] + slack,
                        f"phi1 {first['phi1']:.4f} (n={first['n']}) -> {last['phi1']:.4f} (n={last['n']})",
                    )
                )
        return report

    @staticmethod
    def run_load_curve(spec: ExperimentSpec) -> ExperimentReport:
        """Solver loads rho(v) against simulated busy fractions."""
        cfg = spec.config
        if cfg.frame.kind != FrameKind.LEFT:
            raise ValidationError("load curve needs a left frame", field="frame", error_code="PARAM_RANGE")
        if not spec.speeds:
            raise ValidationError("load curve needs speeds", field="speeds", error_code="PARAM_RANGE")
        report = ExperimentRunner._report(spec, ["v", "n"])
        sr = WaveSolver.speed_range(cfg, tol_v=spec.tol_v, grid=spec.grid)
        curve = WaveSolver.load_curve(cfg, spec.speeds, v_max=sr.v_max, grid=spec.grid)
        report.references = {"speed_range": sr.to_dict(), "load_curve": [list(p) for p in curve]}

        loads = [rho for _, rho in curve]
        report.assertions.append(
            AssertionResult(
                "load_strictly_decreasing", all(b < a for a, b in zip(loads, loads[1:])), f"loads={loads}"
            )
        )
        for i, (v, rho) in enumerate(curve):
            framed = cfg.with_speed(v)
            cells = ExperimentRunner._stationary_cells(spec, framed, i * len(spec.n_list))
            for n, samples in zip(spec.n_list, cells):
                busy, busy_hw = _ci_entry([s["busy_fraction"] for s in samples])
                report.cells.append({"v": v, "n": n, "load": rho, "busy_fraction": busy, "busy_half_width": busy_hw})
            last = report.cells[-1]
            report.assertions.append(
                AssertionResult(
                    f"busy_matches_load[v={v}]",
                    abs(last["busy_fraction"] - rho) <= spec.busy_tol,
                    f"busy={last['busy_fraction']:.5f} load={rho:.5f} n={last['n']}",
                )
            )
        return report

    @staticmethod
    def run_speed_range_report(spec: ExperimentSpec) -> ExperimentReport:
        """Shooting probes, the bracketed range and the flux identity of the free fixed point."""
        cfg = spec.config
        report = ExperimentRunner._report(spec, ["v"])
        sr = WaveSolver.speed_range(cfg, tol_v=spec.tol_v, grid=spec.grid)
        report.references = {"speed_range": sr.to_dict()}
        report.cells = [{"v": v, "classification": label} for v, label in sr.probes]
        if not sr.analytic_fallback:
            fp = WaveSolver.free_fixed_point(cfg, speed_range=sr, grid=spec.grid)
            flux = WaveSolver.wave_flux_identity(fp, cfg)
            report.references["free_fixed_point"] = fp.sidecar()
            report.references["flux_residual"] = flux
            report.assertions.append(AssertionResult("flux_identity", flux <= FLUX_TOL, f"{flux:.3g} <= {FLUX_TOL}"))
        report.assertions.append(
            AssertionResult("range_ordered", sr.v_min <= sr.v_max, f"[{sr.v_min:.6f}, {sr.v_max:.6f}]")
        )
        return report

    @staticmethod
    def run(spec: ExperimentSpec) -> ExperimentReport:
        handlers = {
            ExperimentKind.VN_CONVERGENCE: ExperimentRunner.run_vn_convergence,
            ExperimentKind.SSAI_LEFT: ExperimentRunner.run_ssai_left,
            ExperimentKind.SSAI_RIGHT: ExperimentRunner.run_ssai_right,
            ExperimentKind.PHI1_BOUND: ExperimentRunner.run_phi1_bound,
            ExperimentKind.LOAD_CURVE: ExperimentRunner.run_load_curve,
            ExperimentKind.SPEED_RANGE_REPORT: ExperimentRunner.run_speed_range_report,
        }
        handler = handlers.get(spec.kind)
        if handler is None:
            raise ExperimentError(f"no handler for {spec.kind}", experiment=str(spec.kind))
        logger.info("Running %s (config %s, seed %d)", spec.kind.value, spec.config.config_hash(), spec.seed)
        report = handler(spec)
        logger.info(
            "%s finished: %d cells, %d/%d assertions passed",
            spec.kind.value,
            len(report.cells),
            sum(a.passed for a in report.assertions),
            len(report.assertions),
        )
        return report
