import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from models.tail_field import InterpolationMode, TailField
from services.field_calculus import FieldCalculator
from utils.errors import FieldError

locations = st.lists(st.floats(min_value=-100, max_value=100, allow_nan=False), min_size=1, max_size=60)


class TestTailField:
    def test_rejects_increasing_values(self):
        with pytest.raises(FieldError) as exc:
            TailField(grid=[0.0, 1.0], values=[0.2, 0.5])
        assert exc.value.error_code == "FIELD_FORMAT"

    def test_rejects_unsorted_grid(self):
        with pytest.raises(FieldError):
            TailField(grid=[1.0, 0.0], values=[0.5, 0.2])

    def test_step_and_left_limit(self):
        x = FieldCalculator.from_samples([0.0, 1.0, 1.0, 3.0])
        assert x.at(-1.0) == 1.0
        assert x.at(0.5) == pytest.approx(0.75)
        assert x.at(1.0) == pytest.approx(0.25)
        assert x.left_limit(1.0) == pytest.approx(0.75)
        assert x.at(5.0) == 0.0

    def test_linear_mode_interpolates(self):
        x = TailField.linear([0.0, 2.0], [1.0, 0.0])
        assert x.at(0.5) == pytest.approx(0.75)
        assert x.mode == InterpolationMode.LINEAR

    def test_constructors(self):
        assert TailField.empty(2.0).at(1.9) == 1.0
        assert TailField.empty(2.0).at(2.0) == 0.0
        inf = TailField.infinite()
        assert inf.x_inf == 1.0
        assert not inf.is_proper()
        assert inf.finite_mass == 0.0


class TestFromSamples:
    def test_empty_input(self):
        with pytest.raises(FieldError) as exc:
            FieldCalculator.from_samples([])
        assert exc.value.error_code == "EMPTY_INPUT"

    def test_infinite_locations(self):
        x = FieldCalculator.from_samples([-math.inf, 0.0, math.inf, math.inf])
        assert x.x_minus_inf == pytest.approx(0.75)
        assert x.x_inf == pytest.approx(0.5)
        assert x.finite_mass == pytest.approx(0.25)

    @given(locations)
    @settings(max_examples=60, deadline=None)
    def test_empirical_tail_properties(self, loc):
        x = FieldCalculator.from_samples(loc)
        assert np.all(np.diff(x.values) <= 0)
        assert x.at(max(loc)) == 0.0
        assert x.at(min(loc) - 1.0) == 1.0
        assert FieldCalculator.mean(x) == pytest.approx(float(np.mean(loc)), rel=1e-9, abs=1e-9)


class TestMoments:
    def test_empirical_moments(self):
        x = FieldCalculator.from_samples([0.0, 1.0, 1.0, 3.0])
        assert FieldCalculator.mean(x) == pytest.approx(1.25)
        assert FieldCalculator.phi_moment(x, 1) == pytest.approx(0.875)

    def test_uniform_cell_moments(self):
        x = TailField.linear([0.0, 2.0], [1.0, 0.0])
        assert FieldCalculator.mean(x) == pytest.approx(1.0)
        assert FieldCalculator.phi_moment(x, 1) == pytest.approx(0.5)
        assert FieldCalculator.phi_moment(x, 2) == pytest.approx(1.0 / 3.0)

    def test_improper_field(self):
        with pytest.raises(FieldError) as exc:
            FieldCalculator.mean(FieldCalculator.from_samples([0.0, math.inf]))
        assert exc.value.error_code == "IMPROPER_FIELD"

    def test_center(self):
        x = FieldCalculator.from_samples([2.0, 4.0, 9.0])
        assert FieldCalculator.mean(FieldCalculator.center(x)) == pytest.approx(0.0, abs=1e-12)


class TestInverse:
    def test_step_inverse(self):
        x = FieldCalculator.from_samples([0.0, 1.0, 1.0, 3.0])
        assert FieldCalculator.inverse(x, 0.5) == 1.0
        assert FieldCalculator.inverse(x, 0.9) == 0.0
        assert FieldCalculator.inverse(x, 0.1) == 3.0
        assert FieldCalculator.inverse(x, 1.0) == -math.inf
        assert FieldCalculator.inverse(x, 1.0, floor=-5.0) == -5.0

    def test_mass_at_infinity(self):
        assert FieldCalculator.inverse(TailField.infinite(), 0.5) == math.inf

    def test_linear_inverse(self):
        x = TailField.linear([0.0, 2.0], [1.0, 0.0])
        assert FieldCalculator.inverse(x, 0.25) == pytest.approx(1.5)

    @given(locations, st.floats(min_value=0.0, max_value=0.999), st.floats(min_value=-150, max_value=150))
    @settings(max_examples=100, deadline=None)
    def test_galois_connection(self, loc, u, w):
        x = FieldCalculator.from_samples(loc)
        level = FieldCalculator.inverse(x, u)
        for point in [w, *loc]:
            assert (x.at(point) > u) == (point < level)


class TestDistances:
    def test_identical_fields(self):
        x = FieldCalculator.from_samples([0.0, 1.0, 2.0])
        assert FieldCalculator.levy_distance(x, x) == 0.0
        assert FieldCalculator.sup_distance(x, x) == 0.0

    def test_point_masses(self):
        x, y = TailField.empty(0.0), TailField.empty(1.0)
        assert FieldCalculator.sup_distance(x, y) == pytest.approx(1.0)
        levy = FieldCalculator.levy_distance(x, y)
        assert levy == pytest.approx(FieldCalculator.levy_distance(y, x), abs=1e-12)
        assert 0.0 < levy <= 1.0 - math.exp(-1.0) + 1e-9

    def test_small_shift_is_close(self):
        x = FieldCalculator.from_samples(np.linspace(-2.0, 2.0, 41))
        assert FieldCalculator.levy_distance(x, x.shifted(0.01)) < 0.011

    def test_mass_escaping_to_infinity_is_far(self):
        near = TailField.empty(0.0)
        assert FieldCalculator.levy_distance(near, TailField.infinite()) > 0.4

    @given(locations, locations)
    @settings(max_examples=40, deadline=None)
    def test_levy_below_sup(self, a, b):
        x, y = FieldCalculator.from_samples(a), FieldCalculator.from_samples(b)
        assert FieldCalculator.levy_distance(x, y) <= FieldCalculator.sup_distance(x, y) + 1e-9


class TestCsv:
    def test_text_layout(self):
        text = FieldCalculator.to_csv(FieldCalculator.from_samples([0.0, 1.0]))
        lines = text.splitlines()
        assert lines[0] == "w,value"
        assert lines[-3:] == ["mode,step", "inf,0.0", "-inf,1.0"]

    def test_file_round_trip(self, tmp_path):
        x = TailField.linear([0.0, 0.5, 2.0], [0.9, 0.4, 0.1], x_minus_inf=0.95)
        path = str(tmp_path / "field.csv")
        FieldCalculator.to_csv(x, path)
        y = FieldCalculator.from_csv(path)
        assert y.mode == InterpolationMode.LINEAR
        assert FieldCalculator.sup_distance(x, y) == 0.0
        assert y.x_minus_inf == pytest.approx(0.95)

    def test_bad_header(self):
        with pytest.raises(FieldError) as exc:
            FieldCalculator.read_csv(io.StringIO("x,y\n0,0\n"))
        assert exc.value.error_code == "FIELD_FORMAT"

    def test_footer_mismatch(self):
        text = "w,value\n0.0,0.5\nmode,step\ninf,0.0\n-inf,1.0\n"
        with pytest.raises(FieldError):
            FieldCalculator.read_csv(io.StringIO(text))
