import numpy as np
import pytest

from models.fixed_point import Classification, FixedPointResult, GridSpec
from models.size_law import SizeDistribution
from models.system_config import Frame
from models.tail_field import TailField
from services.field_calculus import FieldCalculator
from services.model_core import ModelCore
from services.particle_sim import ParticleSimulator
from services.wave_solver import WaveSolver
from utils.cache import CacheManager
from utils.errors import SolverError, ValidationError

from conftest import make_config


class TestBeta:
    def test_exponential_pair(self, exp_free):
        assert WaveSolver.beta_solve(exp_free, 1.0) == pytest.approx(1.0, abs=1e-9)

    def test_no_root_at_mean_rate(self, exp_free):
        with pytest.raises(SolverError) as exc:
            WaveSolver.beta_solve(exp_free, 2.0)
        assert exc.value.error_code == "NO_ROOT"

    def test_deterministic_sizes(self):
        cfg = make_config(d=1, k=1, dist=SizeDistribution.deterministic(1.0))
        assert WaveSolver.beta_solve(cfg, 0.5) == pytest.approx(1.59362, abs=1e-5)


class TestShooting:
    def test_slow_speed_hits_axis(self, exp_free):
        fp = WaveSolver.defp_integrate(exp_free, 0.5)
        assert fp.classification == Classification.HIT_AXIS
        assert fp.hit_point is not None
        assert fp.beta_used > 0

    def test_fast_speed_is_improper(self, exp_free):
        fp = WaveSolver.defp_integrate(exp_free, 1.5)
        assert fp.classification == Classification.IMPROPER_RIGHT
        assert 0.0 < fp.eps_star < 1.0

    def test_free_dispatch_with_speed(self, exp_free):
        fp = WaveSolver.fixed_point(exp_free, v=1.5)
        assert fp.classification == Classification.IMPROPER_RIGHT
        assert fp.frame.is_free


class TestRegulated:
    def test_right_frame_single_particle_jobs(self, single_right):
        fp = WaveSolver.right_regulated_fp(single_right)
        assert fp.classification == Classification.HIT_AXIS
        assert fp.hit_point == 0.0
        assert fp.diagnostics["v_min"] == pytest.approx(1.0)
        nodes = fp.field.grid[(fp.field.grid <= 0.0) & (fp.field.grid >= -10.0)]
        gap = np.abs(np.asarray(fp.field.at(nodes)) - (1.0 - np.exp(nodes)))
        assert gap.max() < 1e-4

    def test_right_frame_speed_in_wave_range(self, single_right):
        with pytest.raises(SolverError) as exc:
            WaveSolver.right_regulated_fp(single_right, v=1.5, v_min=1.0)
        assert exc.value.error_code == "SPEED_IN_WAVE_RANGE"

    def test_left_frame_speed_in_wave_range(self, exp_left):
        with pytest.raises(SolverError) as exc:
            WaveSolver.left_regulated_fp(exp_left, v=0.5, v_max=1.0)
        assert exc.value.error_code == "SPEED_IN_WAVE_RANGE"

    def test_frame_checks(self, exp_free):
        with pytest.raises(ValidationError):
            WaveSolver.left_regulated_fp(exp_free, v=2.0, v_max=1.0)
        with pytest.raises(ValidationError):
            WaveSolver.right_regulated_fp(exp_free, v=0.5, v_min=1.0)

    def test_flux_identity_needs_free_fixed_point(self, exp_left):
        fp = FixedPointResult(
            field=TailField.empty(0.0),
            speed=2.0,
            classification=Classification.REGULATED,
            frame=Frame(left=0.0),
            grid_step=0.01,
        )
        with pytest.raises(SolverError) as exc:
            WaveSolver.wave_flux_identity(fp, exp_left)
        assert exc.value.error_code == "NOT_FREE_FP"

    @pytest.mark.slow
    def test_left_frame_cross_check(self, exp_left):
        fp = WaveSolver.left_regulated_fp(exp_left, v_max=1.0)
        assert fp.load == pytest.approx(0.5, abs=1e-3)
        assert fp.diagnostics["defp_classification"] == "regulated"
        assert fp.diagnostics["defp_levy"] < 0.02

    @pytest.mark.slow
    def test_right_frame_cross_check(self, exp_right):
        fp = WaveSolver.right_regulated_fp(exp_right, v_min=1.0)
        assert "ml_mfp_error" not in fp.diagnostics
        assert fp.diagnostics["ml_mfp_levy"] < 1e-2

    def test_cross_check_can_be_skipped(self, single_right):
        fp = WaveSolver.right_regulated_fp(single_right, v_min=1.0, cross_check=False)
        assert "ml_mfp_levy" not in fp.diagnostics

    @pytest.mark.slow
    def test_load_curve(self, exp_left):
        curve = WaveSolver.load_curve(exp_left, [4.0, 1.25, 2.0], v_max=1.0)
        assert [v for v, _ in curve] == [1.25, 2.0, 4.0]
        assert [rho for _, rho in curve] == pytest.approx([0.8, 0.5, 0.25], abs=2e-3)


class TestSpeedRange:
    def test_single_particle_jobs_fall_back(self):
        sr = WaveSolver.speed_range(make_config(d=1, k=1))
        assert sr.analytic_fallback
        assert sr.v_min == sr.v_max == pytest.approx(1.0)

    def test_free_fixed_point_needs_a_bracket(self):
        cfg = make_config(d=2, k=2)
        with pytest.raises(SolverError) as exc:
            WaveSolver.free_fixed_point(cfg)
        assert exc.value.error_code == "ASSUMPTION_VIOLATED"

    @pytest.mark.slow
    def test_exponential_pair(self, exp_free):
        sr = WaveSolver.speed_range(exp_free, tol_v=1e-3)
        assert sr.v_min == pytest.approx(1.0, abs=1e-2)
        assert sr.v_max == pytest.approx(1.0, abs=1e-2)
        assert sr.v_min <= sr.v_max
        assert sr.lower_bracket[0] < sr.lower_bracket[1]

    @pytest.mark.slow
    def test_cached_by_config(self, exp_free):
        manager = CacheManager()
        first = WaveSolver.speed_range(exp_free, tol_v=1e-2, cache_manager=manager)
        second = WaveSolver.speed_range(exp_free.with_speed(3.0), tol_v=1e-2, cache_manager=manager)
        assert first.to_dict() == second.to_dict()

    @pytest.mark.slow
    def test_free_fixed_point_flux(self, exp_free):
        sr = WaveSolver.speed_range(exp_free, tol_v=1e-3)
        fp = WaveSolver.free_fixed_point(exp_free, speed_range=sr)
        assert fp.classification == Classification.PROPER_FREE
        assert fp.speed == pytest.approx(1.0, abs=1e-2)
        assert WaveSolver.wave_flux_identity(fp, exp_free) < 0.01
        assert fp.diagnostics["source_classification"] == "hit_axis"
        assert fp.diagnostics["approximate"]

    @pytest.mark.slow
    def test_flux_residual_shrinks_with_the_grid(self, exp_free):
        coarse = GridSpec(rel_step=0.01)
        residuals = []
        for grid in (coarse, coarse.refined(2.0)):
            fp = WaveSolver.free_fixed_point(exp_free, grid=grid)
            residuals.append(WaveSolver.wave_flux_identity(fp, exp_free))
        assert residuals[0] < 0.01
        assert residuals[1] <= max(0.5 * residuals[0], 1e-4)

    @pytest.mark.slow
    def test_deterministic_pair_speed(self, rng):
        cfg = make_config(dist=SizeDistribution.deterministic(1.0))
        sr = WaveSolver.speed_range(cfg, tol_v=1e-2)
        assert 1.0 < sr.v_min <= sr.v_max < 2.0
        est = ParticleSimulator.estimate_vn(cfg, 1000, horizon=150.0, burn_in=50.0, rng=rng)
        assert 1.0 <= est.quantile_rate <= 2.0
        # finite systems run ahead of the limit
        assert sr.v_min <= est.quantile_rate + 2.0 * est.quantile_half_width


class TestBoundaryShooting:
    def test_load_must_be_a_probability(self, exp_left):
        with pytest.raises(ValidationError) as exc:
            WaveSolver.defp_from_boundary(exp_left, 2.0, 1.5)
        assert exc.value.error_code == "PARAM_RANGE"

    def test_boundary_atom(self, exp_left):
        fp = WaveSolver.defp_from_boundary(exp_left, 2.0, 0.5)
        assert fp.classification != Classification.PROPER_FREE
        assert fp.load == 0.5
        assert fp.field.at(0.0) == pytest.approx(0.5)
        assert fp.frame.left == 0.0

    @pytest.mark.slow
    def test_uniqueness_probe(self, exp_left):
        probe = WaveSolver.uniqueness_probe(exp_left)
        assert probe.reference_load == pytest.approx(0.5, abs=1e-3)
        assert len(probe.loads) == len(probe.outcomes) == len(probe.tail_levels) == 4
        assert probe.to_dict()["speed"] == 2.0


class TestFixedPointStructure:
    def test_inverse_difference_is_non_increasing(self, exp_free):
        slow = WaveSolver.defp_integrate(exp_free, 0.5).field
        fast = WaveSolver.defp_integrate(exp_free, 0.8).field
        levels = np.linspace(0.05, 0.95, 46)
        psi = FieldCalculator.inverse(fast, levels) - FieldCalculator.inverse(slow, levels)
        assert np.all(np.diff(psi) <= 1e-3)

    def test_truncated_fixed_point_solves_reduced_system(self, exp_right):
        x = WaveSolver.right_regulated_fp(exp_right, v_min=1.0, cross_check=False).field
        median = FieldCalculator.inverse(x, 0.5)
        keep = x.grid < median
        truncated = TailField.linear(
            np.append(x.grid[keep], median), np.append((x.values[keep] - 0.5) / 0.5, 0.0).clip(0.0, 1.0)
        )
        reduced = ModelCore.reduce_system(exp_right, 0.5, 0.0).with_frame(Frame(right=median))
        rebuilt = WaveSolver.right_regulated_fp(reduced, v=0.5, v_min=1.0, cross_check=False).field
        assert FieldCalculator.levy_distance(truncated, rebuilt) < 0.02

    def test_shooting_start_does_not_matter(self, exp_free):
        a = WaveSolver.defp_integrate(exp_free, 0.5, eps0=0.995)
        b = WaveSolver.defp_integrate(exp_free, 0.5, eps0=0.999)
        aligned = a.field.shifted(b.hit_point - a.hit_point)
        assert FieldCalculator.levy_distance(aligned, b.field) < 0.02

    @pytest.mark.slow
    def test_reduced_system_with_two_completions(self):
        cfg = make_config(d=3, k=2, frame=Frame(right=0.0))
        reduced = ModelCore.reduce_system(cfg, 0.3, 0.1)
        sr = WaveSolver.speed_range(reduced, tol_v=1e-2)
        fp = WaveSolver.right_regulated_fp(reduced, v=0.5 * sr.v_min, v_min=sr.v_min, cross_check=False)
        assert fp.classification == Classification.HIT_AXIS
        assert fp.hit_point == 0.0
        assert fp.field.is_proper()
        assert fp.field.at(0.0) == pytest.approx(0.0, abs=1e-9)
