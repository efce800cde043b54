"""Retrieval ranking metrics: Hits@K, MRR, Mean Rank, for both directions."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import PairedDataset
from .errors import ValidationError
from .model import ModelParams, Side, project


class Direction(enum.Enum):
    TEXT_TO_MOL = "text_to_mol"
    MOL_TO_TEXT = "mol_to_text"


@dataclass(frozen=True)
class MetricsReport:
    direction: Direction
    query_count: int
    hits_at_1: float
    hits_at_10: float
    mrr: float
    mean_rank: float


def ranks_from_scores(scores: np.ndarray) -> np.ndarray:
    """Rank of the true candidate (index i for query i) under a pessimist-stable tie rule.

    rank_i = 1 + |{j != i : score_j > score_i}| + |{j < i : score_j == score_i}|,
    so candidates tied with the truth count ahead of it when their index is lower.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
        raise ValidationError(f"expected a square score matrix, got shape {s.shape}")
    n = s.shape[0]
    true = np.diag(s)[:, None]
    greater = (s > true).sum(axis=1)
    earlier = np.arange(n)[None, :] < np.arange(n)[:, None]
    tied_earlier = ((s == true) & earlier).sum(axis=1)
    return (1 + greater + tied_earlier).astype(np.int64)


def rank_queries(params: ModelParams, ds: PairedDataset, direction: Direction) -> np.ndarray:
    """Rank the true counterpart of every sample among all N candidates."""
    if not isinstance(direction, Direction):
        raise ValidationError(f"unknown direction {direction!r}")
    a = project(params, Side.TEXT, ds.text.values)
    m = project(params, Side.MOLECULE, ds.molecule.values)
    scores = a @ m.T if direction is Direction.TEXT_TO_MOL else m @ a.T
    return ranks_from_scores(scores)


def _check_ranks(ranks) -> np.ndarray:
    r = np.asarray(ranks, dtype=np.int64)
    if r.ndim != 1 or r.size < 1:
        raise ValidationError("rank list must be nonempty and 1-D")
    if r.min() < 1:
        raise ValidationError("ranks are 1-based; found a rank < 1")
    return r


def hits_at_k(ranks, k: int) -> float:
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    r = _check_ranks(ranks)
    return float(np.count_nonzero(r <= k) / r.size)


def mrr(ranks) -> float:
    r = _check_ranks(ranks)
    return float(np.mean(1.0 / r))


def mean_rank(ranks) -> float:
    r = _check_ranks(ranks)
    return float(np.mean(r.astype(np.float64)))


def compute_metrics(params: ModelParams, ds: PairedDataset, direction: Direction) -> MetricsReport:
    ranks = rank_queries(params, ds, direction)
    return MetricsReport(
        direction=direction,
        query_count=int(ranks.size),
        hits_at_1=hits_at_k(ranks, 1),
        hits_at_10=hits_at_k(ranks, 10),
        mrr=mrr(ranks),
        mean_rank=mean_rank(ranks),
    )


def metrics_report_line(report: MetricsReport) -> str:
    """One stable-order key=value line per direction; floats keep full precision."""
    return (
        f"direction={report.direction.value}"
        f"\tquery_count={report.query_count}"
        f"\thits_at_1={report.hits_at_1!r}"
        f"\thits_at_10={report.hits_at_10!r}"
        f"\tmrr={report.mrr!r}"
        f"\tmean_rank={report.mean_rank!r}"
    )
