import math

import numpy as np
import pytest

from models.fixed_point import Classification
from models.system_config import Frame
from models.tail_field import TailField
from services.meanfield import MeanFieldSolver
from utils.errors import SolverError, ValidationError

from conftest import make_config


class TestIntegrate:
    @pytest.mark.parametrize("d, expected", [(1, 1.0 - math.exp(-1.0)), (2, 1.0 - math.exp(-2.0))])
    def test_mass_leaves_the_origin(self, d, expected):
        cfg = make_config(d=d, k=1)
        traj = MeanFieldSolver.ml_integrate(TailField.empty(0.0), cfg, horizon=1.0)
        assert traj.final().at(0.0) == pytest.approx(expected, abs=1e-3)

    def test_record_times(self, exp_free):
        start = TailField.empty(0.0)
        traj = MeanFieldSolver.ml_integrate(start, exp_free, horizon=1.0, record_times=[0.25, 1.0])
        assert len(traj.fields) == 2
        assert traj.times == pytest.approx([0.25, 1.0], abs=0.02)
        assert traj.fields[0].at(0.0) < traj.fields[1].at(0.0)

    def test_record_times_within_horizon(self, exp_free):
        with pytest.raises(ValidationError) as exc:
            MeanFieldSolver.ml_integrate(TailField.empty(0.0), exp_free, horizon=1.0, record_times=[2.0])
        assert exc.value.error_code == "PARAM_RANGE"

    def test_unanchored_output_moves_the_boundary(self, exp_left):
        anchored = MeanFieldSolver.ml_integrate(TailField.empty(0.0), exp_left, horizon=0.5).final()
        moving = MeanFieldSolver.ml_integrate(TailField.empty(0.0), exp_left, horizon=0.5, anchored=False)
        shift = moving.fields[-1].grid[0] - anchored.grid[0]
        assert shift == pytest.approx(2.0 * moving.times[-1])
        assert not moving.anchored


class TestExtremeFixedPoints:
    def test_needs_one_sided_frame(self, exp_free):
        with pytest.raises(ValidationError) as exc:
            MeanFieldSolver.ml_mfp(exp_free)
        assert exc.value.error_code == "PARAM_RANGE"

    @pytest.mark.slow
    def test_left_frame_load(self, exp_left):
        fp = MeanFieldSolver.ml_mfp(exp_left)
        assert fp.classification == Classification.REGULATED
        assert fp.load == pytest.approx(0.5, abs=1e-3)
        assert fp.field.at(0.0) == pytest.approx(fp.load)
        assert fp.field.x_inf < 1e-6

    @pytest.mark.slow
    def test_left_frame_too_slow(self):
        cfg = make_config(frame=Frame(left=0.0), speed=0.5)
        with pytest.raises(SolverError) as exc:
            MeanFieldSolver.ml_mfp(cfg)
        assert exc.value.error_code == "NO_PROPER_FP"

    @pytest.mark.slow
    def test_right_frame_single_particle_jobs(self, single_right):
        fp = MeanFieldSolver.ml_mfp(single_right)
        assert fp.hit_point == 0.0
        nodes = fp.field.grid[fp.field.grid <= 0.0]
        gap = np.abs(np.asarray(fp.field.at(nodes)) - (1.0 - np.exp(nodes)))
        assert gap.max() < 1e-3


class TestTwoSided:
    def test_needs_finite_frame(self, exp_left):
        with pytest.raises(ValidationError):
            MeanFieldSolver.two_sided_fp(exp_left)

    def test_finite_frame(self):
        cfg = make_config(frame=Frame(left=0.0, right=4.0), speed=1.0)
        fp = MeanFieldSolver.two_sided_fp(cfg, tol=1e-5)
        assert 0.0 < fp.load < 1.0
        assert fp.field.x_inf == 0.0
        assert fp.field.grid[-1] == pytest.approx(4.0)
        assert np.all(np.diff(fp.field.values) <= 0)


class TestMedianSpeed:
    def test_two_sided_needs_positive_speed(self):
        cfg = make_config(frame=Frame(left=0.0, right=4.0), speed=0.0)
        with pytest.raises(ValidationError) as exc:
            MeanFieldSolver.two_sided_fp(cfg)
        assert exc.value.error_code == "PARAM_RANGE"

    @pytest.mark.slow
    def test_estimate_near_wave_speed(self, exp_free):
        result = MeanFieldSolver.median_speed_estimate(exp_free, bounds=(16.0,), tol_v=1e-2)
        assert result["bounds"] == [16.0]
        assert result["estimate"] == result["speeds"][-1]
        assert result["estimate"] == pytest.approx(1.0, abs=0.1)
