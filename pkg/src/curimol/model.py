"""Reference dual-projection retrieval backbone.

One linear head per modality maps embeddings into a shared space, followed by
L2 normalization so cosine similarity is a plain dot product. The training
signal is a symmetric in-batch triplet loss with hardest-negative mining, and
its gradients are derived by hand (no autodiff dependency) so they can be
validated against central finite differences.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, NumericError, ValidationError

CHECKPOINT_MAGIC = b"CMRM"
CHECKPOINT_VERSION = 1

_CKPT_HEADER = struct.Struct("<4sHHQQQ")


class Side(enum.Enum):
    TEXT = "text"
    MOLECULE = "molecule"


@dataclass(frozen=True)
class TrainerConfig:
    proj_dim: int = 300
    margin: float = 0.2
    learning_rate: float = 1e-4
    batch_size: int = 32
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.proj_dim < 1:
            raise ValidationError(f"proj_dim must be >= 1, got {self.proj_dim}")
        if not (self.margin > 0.0):
            raise ValidationError(f"margin must be > 0, got {self.margin}")
        if not (self.learning_rate > 0.0):
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 2:
            raise ValidationError("batch_size must be >= 2 (in-batch negatives)")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ValidationError("adam betas must lie in [0, 1)")
        if not (self.adam_epsilon > 0.0):
            raise ValidationError("adam_epsilon must be > 0")


@dataclass
class ModelParams:
    """Projection weights and biases, float64 throughout."""

    w_text: np.ndarray
    b_text: np.ndarray
    w_mol: np.ndarray
    b_mol: np.ndarray

    def __post_init__(self):
        self.w_text = np.asarray(self.w_text, dtype=np.float64)
        self.b_text = np.asarray(self.b_text, dtype=np.float64)
        self.w_mol = np.asarray(self.w_mol, dtype=np.float64)
        self.b_mol = np.asarray(self.b_mol, dtype=np.float64)
        if self.w_text.ndim != 2 or self.w_mol.ndim != 2:
            raise ValidationError("projection weights must be 2-D")
        if self.b_text.shape != (self.w_text.shape[1],):
            raise ValidationError("b_text shape does not match w_text")
        if self.b_mol.shape != (self.w_mol.shape[1],):
            raise ValidationError("b_mol shape does not match w_mol")
        if self.w_text.shape[1] != self.w_mol.shape[1]:
            raise ValidationError("text and molecule heads must share proj_dim")

    @property
    def dim_text(self) -> int:
        return self.w_text.shape[0]

    @property
    def dim_molecule(self) -> int:
        return self.w_mol.shape[0]

    @property
    def proj_dim(self) -> int:
        return self.w_text.shape[1]

    def blocks(self):
        """Named parameter blocks in checkpoint order."""
        return (
            ("w_text", self.w_text),
            ("b_text", self.b_text),
            ("w_mol", self.w_mol),
            ("b_mol", self.b_mol),
        )

    def copy(self) -> "ModelParams":
        return ModelParams(
            w_text=self.w_text.copy(),
            b_text=self.b_text.copy(),
            w_mol=self.w_mol.copy(),
            b_mol=self.b_mol.copy(),
        )


def init_model(cfg: TrainerConfig, dim_text: int, dim_molecule: int) -> ModelParams:
    """Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; biases zero."""
    if dim_text < 1 or dim_molecule < 1:
        raise ValidationError("embedding dims must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    bt = 1.0 / np.sqrt(dim_text)
    bm = 1.0 / np.sqrt(dim_molecule)
    return ModelParams(
        w_text=rng.uniform(-bt, bt, size=(dim_text, cfg.proj_dim)),
        b_text=np.zeros(cfg.proj_dim),
        w_mol=rng.uniform(-bm, bm, size=(dim_molecule, cfg.proj_dim)),
        b_mol=np.zeros(cfg.proj_dim),
    )


def _head(params: ModelParams, side: Side):
    if side is Side.TEXT:
        return params.w_text, params.b_text
    if side is Side.MOLECULE:
        return params.w_mol, params.b_mol
    raise ValidationError(f"unknown side {side!r}")


def _project_forward(w, b, rows):
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("projection expects a 2-D batch of rows")
    if x.shape[1] != w.shape[0]:
        raise ValidationError(f"row width {x.shape[1]} does not match head input dim {w.shape[0]}")
    z = x @ w + b
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise NumericError("projection produced a zero-norm or non-finite row")
    out = z / norms[:, None]
    return out, x, norms


def project(params: ModelParams, side: Side, rows) -> np.ndarray:
    """Map embedding rows through one head; output rows are unit-norm."""
    w, b = _head(params, side)
    out, _, _ = _project_forward(w, b, rows)
    return out


def _normalize_backward(out, norms, d_out):
    # out = z/|z|  =>  dz = (d_out - (out . d_out) out) / |z|
    inner = np.sum(out * d_out, axis=1, keepdims=True)
    return (d_out - inner * out) / norms[:, None]


def triplet_loss_batch(text_rows, mol_rows, params: ModelParams, margin: float):
    """Symmetric hardest-negative in-batch triplet loss and its exact gradients.

    For each text anchor i the positive is molecule i and the negative is the
    other in-batch molecule with maximal cosine (ties to the lowest index);
    mirrored for molecule anchors. Per-anchor hinge max(0, margin - pos + neg),
    averaged over all 2B anchors. The argmax choice is treated as locally
    constant, which is exact away from selection boundaries.
    """
    if not (margin > 0.0):
        raise ValidationError(f"margin must be > 0, got {margin}")
    a_out, a_x, a_norms = _project_forward(params.w_text, params.b_text, text_rows)
    m_out, m_x, m_norms = _project_forward(params.w_mol, params.b_mol, mol_rows)
    b = a_out.shape[0]
    if b < 2:
        raise ValidationError("triplet loss needs a batch of at least 2 pairs")
    if m_out.shape[0] != b:
        raise ValidationError("text and molecule batches differ in length")

    scores = a_out @ m_out.T
    pos = np.diag(scores).copy()
    masked = scores.copy()
    np.fill_diagonal(masked, -np.inf)
    neg_for_text = np.argmax(masked, axis=1)  # first max = lowest index on ties
    neg_for_mol = np.argmax(masked, axis=0)
    rows = np.arange(b)

    hinge_t = margin - pos + scores[rows, neg_for_text]
    hinge_m = margin - pos + scores[neg_for_mol, rows]
    act_t = hinge_t > 0.0
    act_m = hinge_m > 0.0
    coef = 1.0 / (2.0 * b)
    loss = coef * (hinge_t[act_t].sum() + hinge_m[act_m].sum())

    d_scores = np.zeros_like(scores)
    it = rows[act_t]
    d_scores[it, neg_for_text[it]] += coef
    d_scores[it, it] -= coef
    im = rows[act_m]
    d_scores[neg_for_mol[im], im] += coef
    d_scores[im, im] -= coef

    d_a = d_scores @ m_out
    d_m = d_scores.T @ a_out
    dz_a = _normalize_backward(a_out, a_norms, d_a)
    dz_m = _normalize_backward(m_out, m_norms, d_m)
    grads = ModelParams(
        w_text=a_x.T @ dz_a,
        b_text=dz_a.sum(axis=0),
        w_mol=m_x.T @ dz_m,
        b_mol=dz_m.sum(axis=0),
    )
    return float(loss), grads


def save_model(params: ModelParams, path) -> None:
    """Binary checkpoint: header then float64 LE blocks in blocks() order."""
    header = _CKPT_HEADER.pack(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        0,
        params.dim_text,
        params.dim_molecule,
        params.proj_dim,
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            for _, block in params.blocks():
                fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc}") from exc


def load_model(path) -> ModelParams:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < _CKPT_HEADER.size:
        raise FormatError(f"{path}: truncated checkpoint header")
    magic, version, reserved, d_t, d_m, p = _CKPT_HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    if reserved != 0:
        raise FormatError(f"{path}: reserved header field is {reserved}, expected 0")
    sizes = [d_t * p, p, d_m * p, p]
    expect = _CKPT_HEADER.size + 8 * sum(sizes)
    if len(raw) != expect:
        raise FormatError(f"{path}: payload is {len(raw)} bytes, expected {expect}")
    offset = _CKPT_HEADER.size
    flat = []
    for n in sizes:
        flat.append(np.frombuffer(raw, dtype="<f8", count=n, offset=offset).astype(np.float64))
        offset += 8 * n
    return ModelParams(
        w_text=flat[0].reshape(d_t, p),
        b_text=flat[1],
        w_mol=flat[2].reshape(d_m, p),
        b_mol=flat[3],
    )
