"""Paired text/molecule embedding data model, binary file format, synthetic generator.

On-disk layout (little-endian throughout):

  embedding table   magic "CMRE" | u16 version=1 | u16 reserved=0 | u64 count | u64 dim
                    followed by count*dim float32 values, row-major
  id manifest       UTF-8 text, one sample id per line, line i labels row i

Embeddings are stored in 32-bit precision (matching common encoder dumps);
everything downstream accumulates in 64-bit.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, FormatError, ValidationError

TABLE_MAGIC = b"CMRE"
TABLE_VERSION = 1
MIN_ROW_NORM = 1e-12

_HEADER = struct.Struct("<4sHHQQ")


def _check_rows(values: np.ndarray, label: str) -> None:
    bad = np.flatnonzero(~np.isfinite(values).all(axis=1))
    if bad.size:
        raise ValidationError(f"{label}: non-finite component in row {bad[0]}")
    norms = np.linalg.norm(values.astype(np.float64), axis=1)
    bad = np.flatnonzero(norms <= MIN_ROW_NORM)
    if bad.size:
        raise ValidationError(
            f"{label}: row {bad[0]} has norm {norms[bad[0]]:.3e} <= {MIN_ROW_NORM}"
        )


@dataclass(frozen=True)
class EmbeddingTable:
    """N x d float32 matrix of embedding rows; immutable after construction."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValidationError(f"embedding table must be 2-D and nonempty, got shape {v.shape}")
        # Private copy so freezing the buffer cannot alias the caller's array.
        v = np.array(v, dtype=np.float32, order="C", copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        _check_rows(v, "embedding table")

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PairedDataset:
    """Aligned text/molecule embedding tables; row i of each forms one pair."""

    ids: tuple[str, ...]
    text: EmbeddingTable
    molecule: EmbeddingTable

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        if self.text.count != self.molecule.count:
            raise ConsistencyError(
                f"text table has {self.text.count} rows, molecule table {self.molecule.count}"
            )
        if len(self.ids) != self.text.count:
            raise ConsistencyError(
                f"manifest lists {len(self.ids)} ids but tables have {self.text.count} rows"
            )
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("sample ids are not pairwise distinct")

    @property
    def count(self) -> int:
        return self.text.count


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for clustered synthetic embeddings with controllable difficulty."""

    n_clusters: int
    samples_per_cluster: tuple[int, ...]
    dim_text: int = 300
    dim_molecule: int = 300
    noise_scale: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "samples_per_cluster", tuple(int(s) for s in self.samples_per_cluster))
        if self.n_clusters < 1:
            raise ValidationError("n_clusters must be >= 1")
        if len(self.samples_per_cluster) != self.n_clusters:
            raise ValidationError(
                f"samples_per_cluster has {len(self.samples_per_cluster)} entries "
                f"for {self.n_clusters} clusters"
            )
        if any(s < 1 for s in self.samples_per_cluster):
            raise ValidationError("every cluster must hold at least one sample")
        if self.dim_text < 1 or self.dim_molecule < 1:
            raise ValidationError("embedding dims must be >= 1")
        if not (self.noise_scale >= 0.0):
            raise ValidationError(f"noise_scale must be >= 0, got {self.noise_scale}")

    @property
    def total(self) -> int:
        return sum(self.samples_per_cluster)


def save_table(table: EmbeddingTable, path) -> None:
    path = Path(path)
    header = _HEADER.pack(TABLE_MAGIC, TABLE_VERSION, 0, table.count, table.dim)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(table.values, dtype="<f4").tobytes())
    except OSError as exc:
        raise OSError(f"cannot write embedding table {path}: {exc}") from exc


def load_table(path) -> EmbeddingTable:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read embedding table {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, reserved, count, dim = _HEADER.unpack_from(raw)
    if magic != TABLE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {TABLE_MAGIC!r}")
    if version != TABLE_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if reserved != 0:
        raise FormatError(f"{path}: reserved header field is {reserved}, expected 0")
    expect = _HEADER.size + count * dim * 4
    if len(raw) != expect:
        raise FormatError(f"{path}: payload is {len(raw)} bytes, expected {expect}")
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(count, dim)
    return EmbeddingTable(values=values)


def save_dataset(ds: PairedDataset, text_path, molecule_path, manifest_path) -> None:
    save_table(ds.text, text_path)
    save_table(ds.molecule, molecule_path)
    try:
        Path(manifest_path).write_text("".join(f"{i}\n" for i in ds.ids), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write manifest {manifest_path}: {exc}") from exc


def load_dataset(text_path, molecule_path, manifest_path) -> PairedDataset:
    text = load_table(text_path)
    molecule = load_table(molecule_path)
    try:
        lines = Path(manifest_path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise OSError(f"cannot read manifest {manifest_path}: {exc}") from exc
    ids = tuple(line for line in lines if line)
    return PairedDataset(ids=ids, text=text, molecule=molecule)


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=-1, keepdims=True)
    return rows / norms


def generate_synthetic(spec: SyntheticSpec) -> PairedDataset:
    """Deterministic clustered dataset: row = normalize(center + noise_scale * gaussian).

    Text and molecule noise are drawn independently, so within a cluster the
    pairing carries no signal beyond cluster identity. Cluster centers are
    uniform on the unit sphere. Rows are renormalized so cosine similarity
    equals the dot product.
    """
    rng = np.random.default_rng(spec.seed)
    centers_t = _unit_rows(rng.standard_normal((spec.n_clusters, spec.dim_text)))
    centers_m = _unit_rows(rng.standard_normal((spec.n_clusters, spec.dim_molecule)))
    text = np.empty((spec.total, spec.dim_text), dtype=np.float32)
    mol = np.empty((spec.total, spec.dim_molecule), dtype=np.float32)
    row = 0
    for c, size in enumerate(spec.samples_per_cluster):
        gt = rng.standard_normal((size, spec.dim_text))
        gm = rng.standard_normal((size, spec.dim_molecule))
        text[row : row + size] = _unit_rows(centers_t[c] + spec.noise_scale * gt).astype(np.float32)
        mol[row : row + size] = _unit_rows(centers_m[c] + spec.noise_scale * gm).astype(np.float32)
        row += size
    ids = tuple(f"s{i:06d}" for i in range(spec.total))
    return PairedDataset(ids=ids, text=EmbeddingTable(text), molecule=EmbeddingTable(mol))
