import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jpsn.core import (
    PolyCylDataset,
    angular_distance,
    atan_star,
    derive_track_features,
    polar_embed,
    wrap_angle,
)
from jpsn.errors import DegenerateStepWarning, DomainError, InsufficientDataError

finite_angles = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestAtanStar:
    def test_positive_x_axis(self):
        assert atan_star(0.0, 1.0) == 0.0

    def test_positive_y_axis(self):
        assert atan_star(1.0, 0.0) == pytest.approx(np.pi / 2, abs=1e-15)

    def test_fourth_quadrant(self):
        # two-argument arctangent oracle shifted into [0, 2*pi)
        expected = np.arctan2(-1.0, 1.0) % (2 * np.pi)
        assert atan_star(-1.0, 1.0) == pytest.approx(expected, abs=1e-15)
        assert atan_star(-1.0, 1.0) == pytest.approx(7 * np.pi / 4, abs=1e-12)

    def test_origin_undefined(self):
        with pytest.raises(DomainError):
            atan_star(0.0, 0.0)

    @given(st.floats(-10, 10), st.floats(-10, 10))
    @settings(max_examples=200, deadline=None)
    def test_matches_arctan2_oracle(self, s, c):
        if s == 0.0 and c == 0.0:
            return
        expected = np.arctan2(s, c) % (2 * np.pi)
        got = atan_star(s, c)
        assert min(abs(got - expected), 2 * np.pi - abs(got - expected)) < 1e-12
        assert 0.0 <= got < 2 * np.pi

    def test_vectorized(self):
        s = np.array([0.0, 1.0, -1.0])
        c = np.array([1.0, 0.0, 1.0])
        out = atan_star(s, c)
        assert out.shape == (3,)
        assert np.allclose(out, [0.0, np.pi / 2, 7 * np.pi / 4])


class TestPolarEmbed:
    def test_unit_east(self):
        assert np.allclose(polar_embed(0.0, 1.0), [1.0, 0.0])

    def test_north_radius_two(self):
        out = polar_embed(np.pi / 2, 2.0)
        assert abs(out[0]) < 1e-15
        assert out[1] == pytest.approx(2.0)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        theta = rng.uniform(0, 2 * np.pi, 100)
        r = rng.uniform(0.1, 10, 100)
        w = polar_embed(theta, r)
        back_theta = atan_star(w[:, 1], w[:, 0])
        back_r = np.hypot(w[:, 0], w[:, 1])
        assert np.abs(back_theta - theta).max() < 1e-12
        assert np.abs(back_r - r).max() < 1e-12

    def test_nonpositive_radius(self):
        with pytest.raises(DomainError):
            polar_embed(0.3, 0.0)
        with pytest.raises(DomainError):
            polar_embed(0.3, -1.0)


class TestAngularDistance:
    def test_antipodal(self):
        assert angular_distance(0.0, np.pi) == pytest.approx(np.pi)

    def test_wraparound(self):
        assert angular_distance(0.1, 2 * np.pi - 0.1) == pytest.approx(0.2, abs=1e-12)

    def test_zero(self):
        assert angular_distance(1.0, 1.0) == 0.0

    @given(finite_angles, finite_angles, finite_angles)
    @settings(max_examples=200, deadline=None)
    def test_metric(self, a, b, c):
        dab = angular_distance(a, b)
        assert 0.0 <= dab <= np.pi + 1e-12
        assert dab == pytest.approx(angular_distance(b, a), abs=1e-12)
        assert dab <= angular_distance(a, c) + angular_distance(c, b) + 1e-9


class TestWrapAngle:
    @given(st.floats(-100, 100), st.integers(-10, 10))
    @settings(max_examples=200, deadline=None)
    def test_period_invariance(self, x, k):
        # rounding can land exactly on the 2*pi seam, so compare on the circle
        assert angular_distance(wrap_angle(x + 2 * np.pi * k), wrap_angle(x)) < 1e-9

    @given(st.floats(-1e8, 1e8))
    @settings(max_examples=200, deadline=None)
    def test_range(self, x):
        assert 0.0 <= wrap_angle(x) < 2 * np.pi


class TestDeriveTrackFeatures:
    def test_collinear(self):
        pos = [(0.0, 0.0), (2.0, 0.0), (4.0, 0.0)]
        feats = derive_track_features(pos)
        assert feats.turning_angles[0] == pytest.approx(0.0)
        assert feats.log_step_lengths[0] == pytest.approx(np.log(2.0))
        assert not feats.turning_missing[0] and not feats.step_missing[0]

    def test_east_then_north(self):
        # headings 0 then pi/2 by hand geometry
        pos = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]
        feats = derive_track_features(pos)
        assert feats.turning_angles[0] == pytest.approx(np.pi / 2)
        assert feats.log_step_lengths[0] == pytest.approx(0.0)

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            derive_track_features([(0.0, 0.0), (1.0, 0.0)])

    def test_degenerate_step_marked_missing(self):
        pos = [(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (2.0, 0.0)]
        with pytest.warns(DegenerateStepWarning):
            feats = derive_track_features(pos)
        assert feats.turning_missing[0]
        assert feats.step_missing[0]
        assert feats.turning_missing[1]
        assert not feats.step_missing[1]


class TestPolyCylDataset:
    def test_angles_wrapped(self):
        data = PolyCylDataset(1, 1, [[7.0]], [[0.5]])
        assert 0.0 <= data.theta[0, 0] < 2 * np.pi
        assert data.theta[0, 0] == pytest.approx(7.0 - 2 * np.pi)

    def test_dimension_checks(self):
        with pytest.raises(DomainError):
            PolyCylDataset(0, 0, np.zeros((3, 0)), np.zeros((3, 0)))
        with pytest.raises(DomainError):
            PolyCylDataset(1, 1, np.zeros((3, 1)), np.zeros((2, 1)))

    def test_observation_view(self):
        data = PolyCylDataset(2, 1, [[0.1, 0.2]], [[3.0]], [[False, True]], [[False]])
        obs = data.observation(0)
        assert obs.angles_missing[1]
        assert obs.linears[0] == 3.0

    def test_labels_length(self):
        with pytest.raises(DomainError):
            PolyCylDataset(1, 1, [[0.1]], [[0.2]], labels=("only-one",))
