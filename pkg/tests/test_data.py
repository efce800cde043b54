"""Tests for embedding tables, paired datasets, and the synthetic generator."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from curimol.data import (
    EmbeddingTable,
    PairedDataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    load_table,
    save_dataset,
    save_table,
)
from curimol.errors import ConsistencyError, FormatError, ValidationError


def _small_dataset(seed=42, n=12, d_t=6, d_m=4):
    rng = np.random.default_rng(seed)
    text = rng.standard_normal((n, d_t))
    mol = rng.standard_normal((n, d_m))
    ids = tuple(f"x{i}" for i in range(n))
    return PairedDataset(
        ids=ids,
        text=EmbeddingTable(text.astype(np.float32)),
        molecule=EmbeddingTable(mol.astype(np.float32)),
    )


class TestEmbeddingTable:
    def test_coerces_to_float32_and_freezes(self):
        t = EmbeddingTable(np.ones((3, 2), dtype=np.float64))
        assert t.values.dtype == np.float32
        assert not t.values.flags.writeable
        assert t.count == 3
        assert t.dim == 2

    def test_does_not_freeze_callers_array(self):
        src = np.ones((3, 2), dtype=np.float32)
        EmbeddingTable(src)
        src[0, 0] = 7.0  # must not raise: the table keeps its own copy

    def test_rejects_non_2d(self):
        with pytest.raises(ValidationError):
            EmbeddingTable(np.ones(4, dtype=np.float32))

    def test_rejects_nonfinite_rows_by_index(self):
        v = np.ones((4, 3), dtype=np.float32)
        v[2, 1] = np.nan
        with pytest.raises(ValidationError, match="row 2"):
            EmbeddingTable(v)

    def test_rejects_zero_norm_row(self):
        v = np.ones((4, 3), dtype=np.float32)
        v[1] = 0.0
        with pytest.raises(ValidationError, match="row 1"):
            EmbeddingTable(v)


class TestPairedDataset:
    def test_count_and_dims(self):
        ds = _small_dataset()
        assert ds.count == 12
        assert ds.text.dim == 6
        assert ds.molecule.dim == 4

    def test_row_count_mismatch(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ConsistencyError):
            PairedDataset(
                ids=("a", "b", "c"),
                text=EmbeddingTable(rng.standard_normal((3, 2)).astype(np.float32)),
                molecule=EmbeddingTable(rng.standard_normal((4, 2)).astype(np.float32)),
            )

    def test_id_count_mismatch(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ConsistencyError):
            PairedDataset(
                ids=("a", "b"),
                text=EmbeddingTable(rng.standard_normal((3, 2)).astype(np.float32)),
                molecule=EmbeddingTable(rng.standard_normal((3, 2)).astype(np.float32)),
            )

    def test_duplicate_ids_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValidationError):
            PairedDataset(
                ids=("a", "a"),
                text=EmbeddingTable(rng.standard_normal((2, 2)).astype(np.float32)),
                molecule=EmbeddingTable(rng.standard_normal((2, 2)).astype(np.float32)),
            )


class TestTableRoundTrip:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(42)
        t = EmbeddingTable(rng.standard_normal((17, 9)).astype(np.float32))
        path = tmp_path / "t.emb"
        save_table(t, path)
        back = load_table(path)
        assert back.values.dtype == np.float32
        assert_array_equal(back.values, t.values)
        assert back.values.tobytes() == t.values.tobytes()

    def test_rewrite_produces_identical_bytes(self, tmp_path):
        rng = np.random.default_rng(7)
        t = EmbeddingTable(rng.standard_normal((5, 3)).astype(np.float32))
        p1, p2 = tmp_path / "a.emb", tmp_path / "b.emb"
        save_table(t, p1)
        save_table(t, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "t.emb"
        rng = np.random.default_rng(1)
        save_table(EmbeddingTable(rng.standard_normal((2, 2)).astype(np.float32)), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="magic"):
            load_table(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "t.emb"
        path.write_bytes(b"CMRE\x01\x00")
        with pytest.raises(FormatError):
            load_table(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.emb"
        rng = np.random.default_rng(1)
        save_table(EmbeddingTable(rng.standard_normal((4, 4)).astype(np.float32)), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-3])
        with pytest.raises(FormatError):
            load_table(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "t.emb"
        rng = np.random.default_rng(1)
        save_table(EmbeddingTable(rng.standard_normal((2, 2)).astype(np.float32)), path)
        raw = bytearray(path.read_bytes())
        raw[4] = 9
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="version"):
            load_table(path)

    def test_missing_file_raises_oserror(self, tmp_path):
        with pytest.raises(OSError):
            load_table(tmp_path / "absent.emb")

    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(min_value=1, max_value=12),
        d=st.integers(min_value=1, max_value=16),
        seed=st.integers(min_value=0, max_value=2**31 - 1),
    )
    def test_round_trip_property(self, tmp_path_factory, n, d, seed):
        rng = np.random.default_rng(seed)
        vecs = rng.standard_normal((n, d)).astype(np.float32)
        vecs += np.where(np.linalg.norm(vecs, axis=1, keepdims=True) < 1e-3, 1.0, 0.0)
        t = EmbeddingTable(vecs)
        path = tmp_path_factory.mktemp("emb") / "t.emb"
        save_table(t, path)
        assert load_table(path).values.tobytes() == t.values.tobytes()


class TestDatasetRoundTrip:
    def test_round_trip(self, tmp_path):
        ds = _small_dataset()
        paths = (tmp_path / "text.emb", tmp_path / "molecule.emb", tmp_path / "ids.txt")
        save_dataset(ds, *paths)
        back = load_dataset(*paths)
        assert back.ids == ds.ids
        assert_array_equal(back.text.values, ds.text.values)
        assert_array_equal(back.molecule.values, ds.molecule.values)

    def test_manifest_is_one_id_per_line(self, tmp_path):
        ds = _small_dataset(n=3)
        save_dataset(ds, tmp_path / "t.emb", tmp_path / "m.emb", tmp_path / "ids.txt")
        lines = (tmp_path / "ids.txt").read_text().splitlines()
        assert lines == list(ds.ids)

    def test_id_count_mismatch_on_load(self, tmp_path):
        ds = _small_dataset(n=4)
        paths = (tmp_path / "t.emb", tmp_path / "m.emb", tmp_path / "ids.txt")
        save_dataset(ds, *paths)
        paths[2].write_text("only-one\n")
        with pytest.raises(ConsistencyError):
            load_dataset(*paths)


class TestSyntheticGenerator:
    def test_shapes_ids_and_unit_norms(self):
        spec = SyntheticSpec(
            n_clusters=3,
            samples_per_cluster=(2, 3, 4),
            dim_text=8,
            dim_molecule=5,
            noise_scale=0.1,
            seed=42,
        )
        ds = generate_synthetic(spec)
        assert ds.count == 9
        assert ds.text.dim == 8
        assert ds.molecule.dim == 5
        assert ds.ids[0] == "s000000"
        assert len(set(ds.ids)) == 9
        assert_allclose(np.linalg.norm(ds.text.values, axis=1), 1.0, atol=1e-5)
        assert_allclose(np.linalg.norm(ds.molecule.values, axis=1), 1.0, atol=1e-5)

    def test_same_seed_reproduces_exactly(self):
        spec = SyntheticSpec(
            n_clusters=2, samples_per_cluster=(5, 5), dim_text=6, dim_molecule=6, seed=9
        )
        a = generate_synthetic(spec)
        b = generate_synthetic(spec)
        assert a.text.values.tobytes() == b.text.values.tobytes()
        assert a.molecule.values.tobytes() == b.molecule.values.tobytes()

    def test_different_seeds_differ(self):
        base = dict(
            n_clusters=2, samples_per_cluster=(4, 4), dim_text=6, dim_molecule=6
        )
        a = generate_synthetic(SyntheticSpec(seed=1, **base))
        b = generate_synthetic(SyntheticSpec(seed=2, **base))
        assert a.text.values.tobytes() != b.text.values.tobytes()

    def test_zero_noise_collapses_clusters(self):
        # With no noise every member equals its cluster centre, so the
        # within-cluster cosine is 1 and the generator's cluster sizes
        # are directly recoverable from pairwise similarities.
        spec = SyntheticSpec(
            n_clusters=2,
            samples_per_cluster=(3, 5),
            dim_text=16,
            dim_molecule=16,
            noise_scale=0.0,
            seed=4,
        )
        ds = generate_synthetic(spec)
        t = ds.text.values.astype(np.float64)
        sims = t @ t.T
        same = sims > 0.999999
        sizes = same.sum(axis=1)
        assert list(sizes) == [3, 3, 3, 5, 5, 5, 5, 5]

    def test_clusters_are_separated(self):
        spec = SyntheticSpec(
            n_clusters=4,
            samples_per_cluster=(6, 6, 6, 6),
            dim_text=64,
            dim_molecule=64,
            noise_scale=0.01,
            seed=3,
        )
        ds = generate_synthetic(spec)
        t = ds.text.values.astype(np.float64)
        labels = np.repeat(np.arange(4), 6)
        sims = t @ t.T
        within = sims[labels[:, None] == labels[None, :]]
        across = sims[labels[:, None] != labels[None, :]]
        assert within.min() > across.max()

    def test_validation(self):
        with pytest.raises(ValidationError):
            SyntheticSpec(n_clusters=0, samples_per_cluster=())
        with pytest.raises(ValidationError):
            SyntheticSpec(n_clusters=2, samples_per_cluster=(3,))
        with pytest.raises(ValidationError):
            SyntheticSpec(n_clusters=1, samples_per_cluster=(0,))
        with pytest.raises(ValidationError):
            SyntheticSpec(n_clusters=1, samples_per_cluster=(2,), noise_scale=-0.5)
