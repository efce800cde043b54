"""Adam optimizer, written out explicitly so every update is auditable."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .model import ModelParams, TrainerConfig


@dataclass
class AdamState:
    m: ModelParams
    v: ModelParams
    step: int = 0

    @classmethod
    def initial(cls, params: ModelParams) -> "AdamState":
        zeros = lambda a: np.zeros_like(a)
        return cls(
            m=ModelParams(*(zeros(b) for _, b in params.blocks())),
            v=ModelParams(*(zeros(b) for _, b in params.blocks())),
        )


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState, cfg: TrainerConfig):
    """One bias-corrected Adam update, in place; returns (params, state)."""
    b1, b2, eps, lr = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon, cfg.learning_rate
    for (name, p), (_, g), (_, m), (_, v) in zip(
        params.blocks(), grads.blocks(), state.m.blocks(), state.v.blocks()
    ):
        if p.shape != g.shape:
            raise ValidationError(f"gradient shape {g.shape} does not match {name} {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter block {name}")
    state.step += 1
    t = state.step
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for (_, p), (_, g), (_, m), (_, v) in zip(
        params.blocks(), grads.blocks(), state.m.blocks(), state.v.blocks()
    ):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / corr1
        v_hat = v / corr2
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state
