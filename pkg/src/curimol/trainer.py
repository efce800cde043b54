"""End-to-end curriculum training loop.

Pipeline per run: quantify difficulty on the training set, sort easy-to-hard,
then for each epoch admit a schedule-controlled prefix, shuffle it into
minibatches with a seeded generator, and apply intensity-scaled triplet-loss
Adam updates. Fully deterministic given (datasets, config).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PairedDataset
from .difficulty import build_index, count_confusable
from .errors import ValidationError
from .evaluate import Direction, MetricsReport, compute_metrics, hits_at_k, rank_queries
from .intensity import scale_loss
from .model import ModelParams, init_model, triplet_loss_batch
from .optim import AdamState, adam_step
from .schedule import CurriculumConfig, plan_epoch


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    fraction: float
    intensity: float
    active_count: int
    mean_batch_loss: float
    val_hits_at_1_text_to_mol: float
    val_hits_at_1_mol_to_text: float


@dataclass(frozen=True)
class TrainReport:
    epochs: tuple[EpochRecord, ...]
    final_text_to_mol: MetricsReport
    final_mol_to_text: MetricsReport
    total_presentations: int


def _batches(order: np.ndarray, batch_size: int):
    """Consecutive chunks; a trailing single sample is folded into the previous
    chunk (a batch of one cannot form an in-batch negative). A bare single
    active sample yields no batches at all."""
    n = order.shape[0]
    if n < 2:
        return []
    chunks = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and chunks[-1].shape[0] == 1:
        chunks[-2 :] = [np.concatenate(chunks[-2:])]
    return chunks


def train(
    ds_train: PairedDataset,
    ds_val: PairedDataset,
    cfg: CurriculumConfig,
    observer=None,
):
    """Run the full curriculum pipeline; returns (params, TrainReport).

    ``observer(epoch, batch_indices, loss, grads)``, when given, is called
    once per optimizer step with the intensity-scaled loss and gradients,
    before the update is applied. It must treat its arguments as read-only;
    it exists so tests can assert admission and scaling properties.
    """
    if ds_val.text.dim != ds_train.text.dim or ds_val.molecule.dim != ds_train.molecule.dim:
        raise ValidationError("validation set dims do not match training set")
    counts = count_confusable(ds_train, cfg.sigma, modality=cfg.difficulty_modality)
    index = build_index(counts, cfg.sigma)

    params = init_model(cfg.trainer, ds_train.text.dim, ds_train.molecule.dim)
    state = AdamState.initial(params)
    rng = np.random.default_rng(cfg.trainer.seed)
    text_values = ds_train.text.values
    mol_values = ds_train.molecule.values

    records = []
    presentations = 0
    for k in range(1, cfg.epochs + 1):
        plan = plan_epoch(cfg, index, k)
        shuffled = plan.active_indices[rng.permutation(plan.active_count)]
        losses = []
        for batch in _batches(shuffled, cfg.trainer.batch_size):
            raw_loss, grads = triplet_loss_batch(
                text_values[batch], mol_values[batch], params, cfg.trainer.margin
            )
            batch_loss = scale_loss(plan.intensity, raw_loss)
            for _, g in grads.blocks():
                g *= plan.intensity
            if observer is not None:
                observer(epoch=k, batch_indices=batch, loss=batch_loss, grads=grads)
            adam_step(params, grads, state, cfg.trainer)
            losses.append(batch_loss)
            presentations += batch.shape[0]
        val_t2m = hits_at_k(rank_queries(params, ds_val, Direction.TEXT_TO_MOL), 1)
        val_m2t = hits_at_k(rank_queries(params, ds_val, Direction.MOL_TO_TEXT), 1)
        records.append(
            EpochRecord(
                epoch=k,
                fraction=plan.fraction,
                intensity=plan.intensity,
                active_count=plan.active_count,
                mean_batch_loss=float(np.mean(losses)) if losses else 0.0,
                val_hits_at_1_text_to_mol=val_t2m,
                val_hits_at_1_mol_to_text=val_m2t,
            )
        )

    report = TrainReport(
        epochs=tuple(records),
        final_text_to_mol=compute_metrics(params, ds_val, Direction.TEXT_TO_MOL),
        final_mol_to_text=compute_metrics(params, ds_val, Direction.MOL_TO_TEXT),
        total_presentations=presentations,
    )
    return params, report
