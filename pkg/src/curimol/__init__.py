"""Curriculum-paced training and evaluation for cross-modal text-molecule retrieval."""

from .data import EmbeddingTable, PairedDataset, SyntheticSpec, generate_synthetic, load_dataset, save_dataset
from .difficulty import DifficultyIndex, build_index, cosine, count_confusable, pair_similarity
from .errors import ConsistencyError, CurimolError, FormatError, NumericError, ValidationError
from .evaluate import Direction, MetricsReport, compute_metrics, hits_at_k, mean_rank, mrr, rank_queries
from .intensity import IntensityCurve, intensity_at, scale_loss
from .model import ModelParams, Side, TrainerConfig, init_model, load_model, project, save_model, triplet_loss_batch
from .optim import AdamState, adam_step
from .schedule import CurriculumConfig, EpochPlan, plan_epoch, sample_fraction, usage_ratio
from .trainer import TrainReport, train

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "ConsistencyError",
    "CurimolError",
    "CurriculumConfig",
    "DifficultyIndex",
    "Direction",
    "EmbeddingTable",
    "EpochPlan",
    "FormatError",
    "IntensityCurve",
    "MetricsReport",
    "ModelParams",
    "NumericError",
    "PairedDataset",
    "Side",
    "SyntheticSpec",
    "TrainReport",
    "TrainerConfig",
    "ValidationError",
    "adam_step",
    "build_index",
    "compute_metrics",
    "cosine",
    "count_confusable",
    "generate_synthetic",
    "hits_at_k",
    "init_model",
    "intensity_at",
    "load_dataset",
    "load_model",
    "mean_rank",
    "mrr",
    "pair_similarity",
    "plan_epoch",
    "project",
    "rank_queries",
    "sample_fraction",
    "save_dataset",
    "save_model",
    "scale_loss",
    "train",
    "triplet_loss_batch",
    "usage_ratio",
]
