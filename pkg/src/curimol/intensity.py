"""Epoch-dependent loss intensity curves and loss scaling.

Two curves grow toward 1 over epochs: a shifted sigmoid 1/(1 + exp(-k-1))
and the rational k/(1+k). CONSTANT_ONE disables the mechanism for ablations.
The epoch index k is 1-based. Note the sigmoid saturates to exactly 1.0 in
float64 once exp(-k-1) drops below half an ulp (k around 36); callers that
need the strict mathematical ordering of far-tail values must evaluate the
formula in higher precision.
"""
from __future__ import annotations

import enum
import math

from .errors import NumericError, ValidationError


class IntensityCurve(enum.Enum):
    SIGMOID = "sigmoid"
    RATIONAL = "rational"
    CONSTANT_ONE = "off"


def intensity_at(curve: IntensityCurve, k: int) -> float:
    """Loss multiplier for epoch k (1-based); lies in (0, 1]."""
    if not isinstance(curve, IntensityCurve):
        raise ValidationError(f"expected an IntensityCurve, got {curve!r}")
    if k != int(k) or k < 1:
        raise ValidationError(f"epoch index must be an integer >= 1, got {k}")
    k = float(k)
    if curve is IntensityCurve.SIGMOID:
        return 1.0 / (1.0 + math.exp(-k - 1.0))
    if curve is IntensityCurve.RATIONAL:
        return k / (1.0 + k)
    return 1.0


def scale_loss(gamma_k: float, epoch_loss: float) -> float:
    """gamma_k * epoch_loss; applied per batch in training, equivalent by linearity."""
    if not (0.0 < gamma_k <= 1.0):
        raise ValidationError(f"intensity must lie in (0, 1], got {gamma_k}")
    if not math.isfinite(epoch_loss):
        raise NumericError(f"non-finite loss {epoch_loss}")
    return gamma_k * epoch_loss
