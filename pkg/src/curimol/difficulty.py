"""Per-sample difficulty from pairwise cross-modal similarity.

A sample's difficulty is the number of other samples whose mean text/molecule
cosine similarity to it exceeds a threshold (strictly). The O(N^2) counting
kernel streams block-rows and may fan blocks out across threads; every pair is
reduced with the same fixed sequential dot-product order as the scalar
``cosine`` below, so counts are bit-identical for any worker count or block
size and can be checked exactly against a naive double loop.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .data import MIN_ROW_NORM, PairedDataset
from .errors import FormatError, ValidationError

MODALITY_BOTH = "both"
MODALITY_TEXT = "text"
MODALITY_MOLECULE = "molecule"
_MODALITIES = (MODALITY_BOTH, MODALITY_TEXT, MODALITY_MOLECULE)

_MODE_CODE = {MODALITY_BOTH: 0, MODALITY_TEXT: 1, MODALITY_MOLECULE: 2}


@njit(cache=True, nogil=True)
def _dot64(u, v):
    # Strict left-to-right accumulation; the whole module's exactness
    # guarantees hang off this loop staying scalar and ordered.
    acc = 0.0
    for k in range(u.shape[0]):
        acc += u[k] * v[k]
    return acc


@njit(cache=True, nogil=True)
def _row_norms(x):
    out = np.empty(x.shape[0], dtype=np.float64)
    for i in range(x.shape[0]):
        out[i] = np.sqrt(_dot64(x[i], x[i]))
    return out


@njit(cache=True, nogil=True)
def _count_block(tx, mx, tnorm, mnorm, sigma, mode, i0, i1, out):
    n = tx.shape[0]
    for i in range(i0, i1):
        c = 0
        for j in range(n):
            if j == i:
                continue
            if mode == 1:
                s = _dot64(tx[i], tx[j]) / (tnorm[i] * tnorm[j])
                s = min(1.0, max(-1.0, s))
            elif mode == 2:
                s = _dot64(mx[i], mx[j]) / (mnorm[i] * mnorm[j])
                s = min(1.0, max(-1.0, s))
            else:
                st = _dot64(tx[i], tx[j]) / (tnorm[i] * tnorm[j])
                st = min(1.0, max(-1.0, st))
                sm = _dot64(mx[i], mx[j]) / (mnorm[i] * mnorm[j])
                sm = min(1.0, max(-1.0, sm))
                s = 0.5 * (st + sm)
            if s > sigma:
                c += 1
        out[i] = c


def cosine(u, v) -> float:
    """dot(u,v)/(|u||v|), accumulated in float64, clamped to [-1, 1]."""
    u = np.ascontiguousarray(np.asarray(u, dtype=np.float64))
    v = np.ascontiguousarray(np.asarray(v, dtype=np.float64))
    if u.ndim != 1 or v.ndim != 1:
        raise ValidationError("cosine expects 1-D vectors")
    if u.shape[0] != v.shape[0]:
        raise ValidationError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = np.sqrt(_dot64(u, u))
    nv = np.sqrt(_dot64(v, v))
    if nu <= MIN_ROW_NORM or nv <= MIN_ROW_NORM:
        raise ValidationError("cosine undefined for (near-)zero-norm vector")
    return float(min(1.0, max(-1.0, _dot64(u, v) / (nu * nv))))


def pair_similarity(ds: PairedDataset, i: int, j: int) -> float:
    """Mean of the text-text and molecule-molecule cosines for samples i and j."""
    n = ds.count
    if not (0 <= i < n and 0 <= j < n):
        raise ValidationError(f"pair index out of range: ({i}, {j}) for {n} samples")
    if i == j:
        # By definition; the float formula can land one ulp under 1.0.
        return 1.0
    st = cosine(ds.text.values[i], ds.text.values[j])
    sm = cosine(ds.molecule.values[i], ds.molecule.values[j])
    return 0.5 * (st + sm)


def count_confusable(
    ds: PairedDataset,
    sigma: float,
    *,
    workers: int | None = None,
    block_size: int = 512,
    modality: str = MODALITY_BOTH,
) -> np.ndarray:
    """counts[i] = |{j != i : similarity(i, j) > sigma}| (strict inequality).

    ``modality`` restricts the similarity to one side ("text" / "molecule")
    for ablations; the default mean of both sides is the reference behavior.
    Results are independent of ``workers`` and ``block_size``.
    """
    if not (-1.0 < sigma <= 1.0):
        raise ValidationError(f"sigma must lie in (-1, 1], got {sigma}")
    if modality not in _MODALITIES:
        raise ValidationError(f"unknown modality {modality!r}, expected one of {_MODALITIES}")
    if block_size < 1:
        raise ValidationError("block_size must be >= 1")
    if workers is None:
        import os

        workers = min(8, os.cpu_count() or 1)
    if workers < 1:
        raise ValidationError("workers must be >= 1")

    tx = ds.text.values.astype(np.float64)
    mx = ds.molecule.values.astype(np.float64)
    tnorm = _row_norms(tx)
    mnorm = _row_norms(mx)
    n = ds.count
    mode = _MODE_CODE[modality]
    out = np.zeros(n, dtype=np.int64)
    blocks = [(i0, min(i0 + block_size, n)) for i0 in range(0, n, block_size)]
    if workers == 1 or len(blocks) == 1:
        for i0, i1 in blocks:
            _count_block(tx, mx, tnorm, mnorm, sigma, mode, i0, i1, out)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_count_block, tx, mx, tnorm, mnorm, sigma, mode, i0, i1, out)
                for i0, i1 in blocks
            ]
            for f in futures:
                f.result()
    return out


@dataclass(frozen=True)
class DifficultyIndex:
    """Confusable-neighbor counts plus the easy-to-hard permutation."""

    counts: np.ndarray
    order: np.ndarray
    sigma: float

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, order="C", copy=True)
        order = np.array(self.order, dtype=np.int64, order="C", copy=True)
        counts.setflags(write=False)
        order.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "order", order)
        n = counts.shape[0]
        if n < 1:
            raise ValidationError("difficulty index needs at least one sample")
        if counts.min() < 0 or counts.max() > n - 1:
            raise ValidationError("counts must lie in [0, N-1]")
        if sorted(order.tolist()) != list(range(n)):
            raise ValidationError("order is not a permutation of 0..N-1")
        sorted_counts = counts[order]
        if np.any(np.diff(sorted_counts) < 0):
            raise ValidationError("order does not sort counts nondecreasingly")

    @property
    def count(self) -> int:
        return self.counts.shape[0]


def build_index(counts, sigma: float) -> DifficultyIndex:
    """Stable sort by nondecreasing count; ties keep ascending original index."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 1 or counts.size < 1:
        raise ValidationError("counts must be a nonempty 1-D sequence")
    order = np.argsort(counts, kind="stable")
    return DifficultyIndex(counts=counts, order=order, sigma=sigma)


def ranks_of(index: DifficultyIndex) -> np.ndarray:
    """rank[i] = 1-based position of sample i in the easy-to-hard order."""
    ranks = np.empty(index.count, dtype=np.int64)
    ranks[index.order] = np.arange(1, index.count + 1)
    return ranks


def write_difficulty_report(path, ids, index: DifficultyIndex) -> None:
    """One record per sample, dataset order: id, confusable count, 1-based rank."""
    if len(ids) != index.count:
        raise ValidationError(f"{len(ids)} ids for {index.count} counts")
    ranks = ranks_of(index)
    lines = ["id\tcount\trank"]
    lines += [f"{ids[i]}\t{index.counts[i]}\t{ranks[i]}" for i in range(index.count)]
    Path(path).write_text("".join(f"{ln}\n" for ln in lines), encoding="utf-8")


def read_difficulty_report(path):
    """Inverse of write_difficulty_report: returns (ids, counts, ranks)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "id\tcount\trank":
        raise FormatError(f"{path}: missing difficulty report header")
    ids, counts, ranks = [], [], []
    for ln in lines[1:]:
        if not ln:
            continue
        parts = ln.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}: malformed record {ln!r}")
        ids.append(parts[0])
        counts.append(int(parts[1]))
        ranks.append(int(parts[2]))
    return tuple(ids), np.asarray(counts, dtype=np.int64), np.asarray(ranks, dtype=np.int64)
