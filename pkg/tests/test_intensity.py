"""Tests for the epoch intensity curves and loss scaling."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curimol.errors import NumericError, ValidationError
from curimol.intensity import IntensityCurve, intensity_at, scale_loss

from oracles import sigmoid_intensity_decimal


class TestCurveValues:
    def test_rational_known_values(self):
        assert intensity_at(IntensityCurve.RATIONAL, 1) == 0.5
        assert intensity_at(IntensityCurve.RATIONAL, 3) == 0.75
        assert intensity_at(IntensityCurve.RATIONAL, 9) == 0.9

    def test_sigmoid_first_epoch(self):
        assert intensity_at(IntensityCurve.SIGMOID, 1) == pytest.approx(
            0.8807970779778823, abs=1e-15
        )

    def test_sigmoid_matches_decimal_reference(self):
        for k in (1, 2, 5, 10, 20, 30):
            want = float(sigmoid_intensity_decimal(k))
            assert intensity_at(IntensityCurve.SIGMOID, k) == pytest.approx(want, abs=1e-15)

    def test_constant_curve_is_one_everywhere(self):
        for k in (1, 2, 17, 1000):
            assert intensity_at(IntensityCurve.CONSTANT_ONE, k) == 1.0

    def test_curve_enum_round_trip(self):
        assert IntensityCurve("off") is IntensityCurve.CONSTANT_ONE
        assert IntensityCurve("sigmoid") is IntensityCurve.SIGMOID
        assert IntensityCurve("rational") is IntensityCurve.RATIONAL


class TestCurveProperties:
    def test_rational_times_denominator_recovers_k(self):
        # k/(1+k) * (1+k) == k holds bit-exactly in float64: the product
        # rounds back to the integer it came from.
        for k in range(1, 20_001):
            assert intensity_at(IntensityCurve.RATIONAL, k) * (1.0 + k) == float(k)

    def test_rational_strictly_increasing_below_one(self):
        values = [intensity_at(IntensityCurve.RATIONAL, k) for k in range(1, 1001)]
        assert all(b > a for a, b in zip(values, values[1:]))
        assert all(v < 1.0 for v in values)

    def test_sigmoid_saturates_in_float64(self):
        # Past k of about 36 the exp term is below half an ulp of 1.0,
        # so the float64 curve parks at exactly 1.0. The mathematical
        # curve stays strictly below 1; see the decimal reference test.
        assert intensity_at(IntensityCurve.SIGMOID, 50) == 1.0

    def test_sigmoid_decimal_reference_strictly_increasing_below_one(self):
        previous = None
        for k in range(1, 1001, 7):
            value = sigmoid_intensity_decimal(k)
            assert value < 1
            if previous is not None:
                assert value > previous
            previous = value

    def test_sigmoid_dominates_rational(self):
        for k in range(1, 2001):
            s = intensity_at(IntensityCurve.SIGMOID, k)
            r = intensity_at(IntensityCurve.RATIONAL, k)
            assert s > r

    @settings(max_examples=60, deadline=None)
    @given(k=st.integers(min_value=1, max_value=10**6))
    def test_all_curves_in_unit_interval(self, k):
        for curve in IntensityCurve:
            v = intensity_at(curve, k)
            assert 0.0 < v <= 1.0


class TestScaleLoss:
    def test_known_value(self):
        assert scale_loss(0.5, 3.0) == 1.5

    def test_identity_at_full_intensity(self):
        assert scale_loss(1.0, 0.7) == 0.7

    def test_linearity(self):
        # Scaling a sum of batch losses equals summing scaled ones.
        gamma = 0.75
        losses = [0.3, 1.2, 0.05, 2.0]
        lhs = scale_loss(gamma, sum(losses))
        rhs = sum(scale_loss(gamma, x) for x in losses)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_rejects_out_of_range_gamma(self):
        with pytest.raises(ValidationError):
            scale_loss(0.0, 1.0)
        with pytest.raises(ValidationError):
            scale_loss(1.2, 1.0)
        with pytest.raises(ValidationError):
            scale_loss(-0.1, 1.0)

    def test_rejects_non_finite_loss(self):
        with pytest.raises(NumericError):
            scale_loss(0.5, math.inf)
        with pytest.raises(NumericError):
            scale_loss(0.5, math.nan)


class TestEpochValidation:
    def test_rejects_non_positive_and_fractional_epochs(self):
        with pytest.raises(ValidationError):
            intensity_at(IntensityCurve.RATIONAL, 0)
        with pytest.raises(ValidationError):
            intensity_at(IntensityCurve.RATIONAL, -3)
        with pytest.raises(ValidationError):
            intensity_at(IntensityCurve.RATIONAL, 1.5)

    def test_rejects_non_enum_curve(self):
        with pytest.raises(ValidationError):
            intensity_at("rational", 1)
