from __future__ import annotations

import numpy as np
import pytest

from readlevel.embeddings import LexiconEmbeddings, hashed_unit_vector
from readlevel.metrics import semantic_score


def test_hashed_vectors_are_unit_and_deterministic():
    v1 = hashed_unit_vector("snowfield", 32)
    v2 = hashed_unit_vector("snowfield", 32)
    assert np.array_equal(v1, v2)
    assert np.linalg.norm(v1) == pytest.approx(1.0)
    assert not np.array_equal(v1, hashed_unit_vector("snowfields", 32))


def test_provider_without_file_uses_hashed_fallback():
    provider = LexiconEmbeddings(dim=16)
    emb = provider.embed("The snow-white canvas.")
    assert emb.tokens == ("the", "snow-white", "canvas")
    assert emb.vectors.shape == (3, 16)
    again = provider.embed("The snow-white canvas.")
    assert np.array_equal(emb.vectors, again.vectors)


def test_provider_reads_lexicon_file(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 1 0 0\ndog 0 1 0\n", encoding="utf-8")
    provider = LexiconEmbeddings(path)
    assert provider.dim == 3
    emb = provider.embed("Cat dog")
    assert np.array_equal(emb.vectors[0], np.array([1.0, 0.0, 0.0]))
    assert np.array_equal(emb.vectors[1], np.array([0.0, 1.0, 0.0]))


def test_provider_rejects_mixed_dimensions(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cat 1 0\ndog 0 1 0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        LexiconEmbeddings(path)


def test_provider_rejects_bad_floats(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("cat one zero\n", encoding="utf-8")
    with pytest.raises(ValueError):
        LexiconEmbeddings(path)


def test_self_similarity_is_perfect():
    provider = LexiconEmbeddings(dim=24)
    text = "Each player was given a small flag to plant at the pole."
    emb = provider.embed(text)
    p, r, f1 = semantic_score(emb.vectors, emb.vectors)
    assert (p, r, f1) == pytest.approx((1.0, 1.0, 1.0))


def test_empty_text_gives_zero_rows():
    provider = LexiconEmbeddings(dim=8)
    emb = provider.embed("!!!")
    assert emb.tokens == ()
    assert emb.vectors.shape == (0, 8)


def test_known_and_unknown_tokens_mix(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("known 1 0 0 0\n", encoding="utf-8")
    provider = LexiconEmbeddings(path)
    emb = provider.embed("known mystery")
    assert np.array_equal(emb.vectors[0], np.array([1.0, 0, 0, 0]))
    assert np.linalg.norm(emb.vectors[1]) == pytest.approx(1.0)
