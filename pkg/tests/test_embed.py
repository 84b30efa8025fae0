"""Hashing embedder, corpus embedding, block layout, and matrix persistence."""

import hashlib
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairaudit.dataset import FIELD_ORDER, Profile, generate_synthetic_corpus
from fairaudit.embed import (
    EmbeddingMatrix,
    embed_corpus,
    hash_embed_field,
    ingest_embeddings,
    load_matrix_file,
    normalize_field_blocks,
    save_embeddings,
)
from fairaudit.errors import (
    DimensionMismatchError,
    IdMismatchError,
    NonFiniteError,
)


def reference_hash_embed(text: str, d: int, seed: int) -> np.ndarray:
    """Straight-line reimplementation of the documented hashing recipe."""
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    tokens = text.lower().split()
    grams = list(tokens)
    for i in range(len(tokens) - 1):
        grams.append(tokens[i] + " " + tokens[i + 1])
    vec = [0.0] * d
    for gram in grams:
        value = int.from_bytes(
            hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=key).digest(), "little"
        )
        vec[(value >> 1) % d] += 1.0 if value & 1 else -1.0
    norm = math.sqrt(sum(x * x for x in vec))
    if norm > 0:
        vec = [x / norm for x in vec]
    return np.array(vec)


class TestHashEmbedField:
    def test_empty_text_zero_vector(self):
        assert np.array_equal(hash_embed_field("", 16, 0), np.zeros(16))
        assert np.array_equal(hash_embed_field("   \n\t ", 16, 0), np.zeros(16))

    def test_deterministic_and_unit_norm(self):
        a = hash_embed_field("strong leadership record", 64, 3)
        b = hash_embed_field("strong leadership record", 64, 3)
        assert np.array_equal(a, b)
        assert abs(np.linalg.norm(a) - 1.0) < 1e-6

    def test_matches_reference_implementation(self):
        for text in ("", "one", "alpha beta gamma", "Mixed CASE tokens repeated tokens"):
            got = hash_embed_field(text, 128, 42)
            expected = reference_hash_embed(text, 128, 42)
            assert np.array_equal(got, expected)

    def test_disjoint_vocabularies_near_orthogonal(self):
        rng = np.random.default_rng(0)
        text_a = " ".join(rng.choice([f"alpha{i}" for i in range(150)], 250))
        text_b = " ".join(rng.choice([f"beta{i}" for i in range(150)], 250))
        a = hash_embed_field(text_a, 4096, 7)
        b = hash_embed_field(text_b, 4096, 7)
        expected = float(reference_hash_embed(text_a, 4096, 7) @ reference_hash_embed(text_b, 4096, 7))
        assert abs(float(a @ b) - expected) < 1e-12
        assert abs(float(a @ b)) < 0.1

    def test_seed_changes_vector(self):
        a = hash_embed_field("alpha beta", 64, 0)
        b = hash_embed_field("alpha beta", 64, 1)
        assert not np.array_equal(a, b)

    def test_max_tokens_truncation(self):
        full = hash_embed_field("a b c d e f", 32, 0)
        truncated = hash_embed_field("a b c d e f", 32, 0, max_tokens=3)
        assert np.array_equal(truncated, hash_embed_field("a b c", 32, 0))
        assert not np.array_equal(truncated, full)

    def test_d_too_small(self):
        with pytest.raises(ValueError):
            hash_embed_field("x", 1, 0)

    @settings(max_examples=50, deadline=None)
    @given(st.text(alphabet=st.characters(codec="utf-8"), max_size=80), st.integers(2, 256))
    def test_norm_property(self, text, d):
        vec = hash_embed_field(text, d, 0)
        norm = np.linalg.norm(vec)
        assert norm == 0.0 or abs(norm - 1.0) < 1e-6


class TestEmbedCorpus:
    def _profiles(self):
        return [
            Profile("A", {"GCEA": "alpha one", "GCEO": "beta two", "PIQ": "gamma",
                          "Leadership": "delta club"}),
            Profile("B", {"GCEA": "epsilon", "GCEO": "zeta", "PIQ": "eta", "Leadership": "theta"}),
        ]

    def test_shape_and_block_layout(self):
        profiles = self._profiles()
        matrix = embed_corpus(profiles, d=8, seed=5)
        assert matrix.data.shape == (2, 40)
        combined_block = matrix.field_block(4)
        assert np.array_equal(
            combined_block[0], hash_embed_field(profiles[0].fields["Combined"], 8, 5)
        )

    def test_default_dimension_gives_3840(self):
        matrix = embed_corpus(self._profiles()[:1])
        assert matrix.data.shape == (1, 3840)
        assert matrix.dim_per_field == 768

    def test_all_empty_fields_zero_row(self):
        profile = Profile("A", {"GCEA": "", "GCEO": "", "PIQ": "", "Leadership": "",
                                "Combined": " "})
        # whitespace-only Combined keeps every block empty
        matrix = embed_corpus([profile], d=8, seed=0)
        assert np.array_equal(matrix.data[0], np.zeros(40))

    def test_block_reconcat_identity(self):
        matrix = embed_corpus(self._profiles(), d=8, seed=1)
        rebuilt = np.hstack([matrix.field_block(f) for f in range(5)])
        assert np.array_equal(rebuilt, matrix.data)

    def test_sequence_view_matches_blocks(self):
        matrix = embed_corpus(self._profiles(), d=8, seed=1)
        seqs = matrix.as_field_sequences()
        assert seqs.shape == (2, 5, 8)
        for f in range(5):
            assert np.array_equal(seqs[:, f], matrix.field_block(f))

    def test_thread_cap_does_not_change_result(self, monkeypatch):
        profiles, _ = generate_synthetic_corpus(12, 40, seed=2)
        serial = embed_corpus(profiles, d=16, seed=0)
        monkeypatch.setenv("FAIRAUDIT_THREADS", "4")
        threaded = embed_corpus(profiles, d=16, seed=0)
        assert np.array_equal(serial.data, threaded.data)


class TestNormalizeFieldBlocks:
    def test_unit_blocks_unchanged(self):
        matrix = embed_corpus([Profile("A", {"GCEA": "a b", "GCEO": "c", "PIQ": "d",
                                             "Leadership": "e"})], d=8, seed=0)
        normalized = normalize_field_blocks(matrix)
        assert np.allclose(normalized.data, matrix.data, atol=1e-12)

    def test_scales_each_block(self):
        data = np.zeros((1, 10))
        data[0, :5] = [3.0, 4.0, 0, 0, 0]  # norm 5
        matrix = EmbeddingMatrix(data, 5, ("X", "Y"), ("A",))
        normalized = normalize_field_blocks(matrix)
        assert np.allclose(normalized.data[0, :5], [0.6, 0.8, 0, 0, 0])
        assert np.array_equal(normalized.data[0, 5:], np.zeros(5))


class TestPersistence:
    def _matrix(self, n=3, d=4):
        rng = np.random.default_rng(0)
        data = rng.standard_normal((n, d * 5))
        return EmbeddingMatrix(data, d, FIELD_ORDER, tuple(f"P{i}" for i in range(n)))

    def test_faem_round_trip(self, tmp_path):
        matrix = self._matrix()
        save_embeddings(matrix, tmp_path / "m.faem")
        ids, data = load_matrix_file(tmp_path / "m.faem")
        assert ids == list(matrix.index_order)
        # float32 storage
        assert np.array_equal(data, matrix.data.astype(np.float32).astype(np.float64))

    def test_ingest_identity(self, tmp_path):
        matrix = self._matrix()
        save_embeddings(matrix, tmp_path / "m.faem")
        loaded = ingest_embeddings(tmp_path / "m.faem", matrix.index_order, 4)
        assert loaded.data.shape == matrix.data.shape
        assert loaded.index_order == matrix.index_order

    def test_ingest_reorders_rows(self, tmp_path):
        matrix = self._matrix(n=2)
        save_embeddings(matrix, tmp_path / "m.faem")  # stored order P0, P1
        loaded = ingest_embeddings(tmp_path / "m.faem", ("P1", "P0"), 4)
        stored = matrix.data.astype(np.float32).astype(np.float64)
        assert np.array_equal(loaded.data[0], stored[1])
        assert np.array_equal(loaded.data[1], stored[0])

    def test_dimension_error_names_both(self, tmp_path):
        matrix = self._matrix(d=4)  # width 20
        save_embeddings(matrix, tmp_path / "m.faem")
        with pytest.raises(DimensionMismatchError, match="15.*20|20.*15"):
            ingest_embeddings(tmp_path / "m.faem", matrix.index_order, 3)

    def test_id_mismatch(self, tmp_path):
        matrix = self._matrix()
        save_embeddings(matrix, tmp_path / "m.faem")
        with pytest.raises(IdMismatchError):
            ingest_embeddings(tmp_path / "m.faem", ("P0", "P1", "WRONG"), 4)

    def test_non_finite_rejected(self, tmp_path):
        data = np.zeros((1, 20))
        data[0, 3] = np.nan
        path = tmp_path / "m.csv"
        path.write_text("P0," + ",".join(str(x) for x in data[0]) + "\n")
        with pytest.raises(NonFiniteError):
            ingest_embeddings(path, ("P0",), 4)

    def test_csv_fallback(self, tmp_path):
        path = tmp_path / "m.csv"
        rows = [f"P{i}," + ",".join(str(float(j + i)) for j in range(10)) for i in range(2)]
        path.write_text("\n".join(rows) + "\n")
        loaded = ingest_embeddings(path, ("P0", "P1"), 2)
        assert loaded.data.shape == (2, 10)
        assert loaded.data[1, 0] == 1.0

    def test_matrix_rejects_nan_at_construction(self):
        data = np.zeros((1, 10))
        data[0, 0] = np.inf
        with pytest.raises(NonFiniteError):
            EmbeddingMatrix(data, 2, FIELD_ORDER, ("A",))
