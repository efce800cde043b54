"""Easy-to-hard sample pacing: linear admission schedule over a difficulty order.

At epoch k (1-based) a fraction min(1, alpha + beta*k) of the dataset is
active, taken as a prefix of the easy-to-hard permutation. Once the fraction
saturates at 1, every epoch trains on the full dataset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .difficulty import _MODALITIES, MODALITY_BOTH, DifficultyIndex
from .errors import ValidationError
from .intensity import IntensityCurve, intensity_at
from .model import TrainerConfig


@dataclass(frozen=True)
class CurriculumConfig:
    """Pacing, difficulty, and intensity settings plus trainer hyperparameters.

    alpha and beta are stored as fractions (0.40, 0.03); the CLI accepts
    percent form (40, 3) and divides by 100 before building this config.
    """

    alpha: float = 0.40
    beta: float = 0.03
    sigma: float = 0.99
    epochs: int = 60
    curve: IntensityCurve = IntensityCurve.RATIONAL
    difficulty_modality: str = MODALITY_BOTH
    trainer: TrainerConfig = field(default_factory=TrainerConfig)

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValidationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (self.beta >= 0.0):
            raise ValidationError(f"beta must be >= 0, got {self.beta}")
        if not (-1.0 < self.sigma <= 1.0):
            raise ValidationError(f"sigma must lie in (-1, 1], got {self.sigma}")
        if self.epochs != int(self.epochs) or self.epochs < 1:
            raise ValidationError(f"epochs must be an integer >= 1, got {self.epochs}")
        if not isinstance(self.curve, IntensityCurve):
            raise ValidationError(f"curve must be an IntensityCurve, got {self.curve!r}")
        if self.difficulty_modality not in _MODALITIES:
            raise ValidationError(f"unknown difficulty modality {self.difficulty_modality!r}")


@dataclass(frozen=True)
class EpochPlan:
    """Resolved admission set and intensity for one epoch."""

    epoch: int
    fraction: float
    active_count: int
    active_indices: np.ndarray
    intensity: float

    def __post_init__(self):
        indices = np.array(self.active_indices, dtype=np.int64, copy=True)
        indices.setflags(write=False)
        object.__setattr__(self, "active_indices", indices)
        if self.active_count != indices.shape[0]:
            raise ValidationError("active_count does not match active_indices length")


def sample_fraction(cfg: CurriculumConfig, k: int) -> float:
    """min(1, alpha + beta*k) for 1-based epoch k."""
    if k != int(k) or not (1 <= k <= cfg.epochs):
        raise ValidationError(f"epoch index {k} outside 1..{cfg.epochs}")
    return min(1.0, cfg.alpha + cfg.beta * k)


def active_count_at(cfg: CurriculumConfig, k: int, n_samples: int) -> int:
    """floor(fraction * N), never below one sample."""
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    return max(1, math.floor(sample_fraction(cfg, k) * n_samples))


def plan_epoch(cfg: CurriculumConfig, index: DifficultyIndex, k: int) -> EpochPlan:
    """Admission prefix of the easy-to-hard order plus the epoch's intensity."""
    frac = sample_fraction(cfg, k)
    count = active_count_at(cfg, k, index.count)
    return EpochPlan(
        epoch=k,
        fraction=frac,
        active_count=count,
        active_indices=index.order[:count],
        intensity=intensity_at(cfg.curve, k),
    )


def usage_ratio(cfg: CurriculumConfig, n_samples: int) -> float:
    """Total sample-presentations divided by epochs * N (1.0 means no curriculum).

    Integer presentation counts are summed exactly before the single final
    division, so divisible sample counts give exact decimal ratios.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    total = sum(active_count_at(cfg, k, n_samples) for k in range(1, cfg.epochs + 1))
    return total / (cfg.epochs * n_samples)
