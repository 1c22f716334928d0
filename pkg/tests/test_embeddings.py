import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kbspace.embeddings import EmbeddingError, EmbeddingStore, load_embeddings, sim_matrix

from oracles import cosine_sim


def _store(**vecs):
    return EmbeddingStore(list(vecs), np.array(list(vecs.values()), dtype=float))


def test_sim_anchor_values():
    s = _store(a=[1.0, 0.0], b=[1.0, 0.0], c=[0.0, 1.0], d=[-1.0, 0.0], z=[0.0, 0.0])
    assert s.sim("a", "b") == 1.0
    assert s.sim("a", "c") == 0.5
    assert s.sim("a", "d") == 0.0
    assert s.sim("a", "z") == 0.5
    assert s.sim("a", "missing") == 0.5
    assert s.sim("a", "a") == 1.0


def test_load_small_file(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("2 3\nfoo 1 2 3\nbar -0.5 0.25 1e-3\n", encoding="utf-8")
    s = load_embeddings(p)
    assert len(s) == 2 and s.dim == 3
    assert s.vector("bar").tolist() == [-0.5, 0.25, 0.001]


def test_count_mismatch_warns(tmp_path, caplog):
    p = tmp_path / "e.txt"
    p.write_text("5 2\nfoo 1 2\nbar 3 4\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        s = load_embeddings(p)
    assert len(s) == 2
    assert any("header declares 5" in r.getMessage() for r in caplog.records)


def test_dimension_mismatch_names_line(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("2 3\nfoo 1 2 3\nbar 1 2\n", encoding="utf-8")
    with pytest.raises(EmbeddingError, match=r":3:"):
        load_embeddings(p)


def test_duplicate_token_last_wins(tmp_path, caplog):
    p = tmp_path / "e.txt"
    p.write_text("2 2\nfoo 1 2\nfoo 3 4\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        s = load_embeddings(p)
    assert s.vector("foo").tolist() == [3.0, 4.0]
    assert any("duplicate" in r.getMessage() for r in caplog.records)


def test_fixture_floats_round_trip(worldcup_dir):
    s = load_embeddings(worldcup_dir / "embeddings.txt")
    lines = (worldcup_dir / "embeddings.txt").read_text(encoding="utf-8").splitlines()[1:]
    for line in lines[:10]:
        tok, *vals = line.split()
        assert s.vector(tok).tolist() == [float(v) for v in vals]


def test_phrase_vector_is_mean_of_known_words():
    s = _store(a=[1.0, 0.0], b=[0.0, 2.0])
    assert s.phrase_vector(["a", "b", "zzz"]).tolist() == [0.5, 1.0]
    assert s.phrase_vector(["zzz"]) is None


vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3)


@given(vec, vec, st.floats(0.01, 100))
def test_sim_properties(u, v, c):
    s = _store(u=u, v=v, cv=[c * x for x in v])
    val = s.sim("u", "v")
    assert 0.0 <= val <= 1.0
    assert val == s.sim("v", "u")
    assert math.isclose(s.sim("u", "cv"), val, abs_tol=1e-12)
    assert math.isclose(val, cosine_sim(u, v), abs_tol=1e-12)


def test_sim_matrix_matches_pairwise():
    rng = np.random.default_rng(1)
    vecs = rng.normal(size=(6, 4))
    vecs[2] = 0
    s = EmbeddingStore([f"t{i}" for i in range(6)], vecs)
    unit, mask = s.unit_rows([f"t{i}" for i in range(6)] + ["missing", None])
    m = sim_matrix(unit, mask, unit, mask)
    names = [f"t{i}" for i in range(6)] + ["missing", "missing"]
    for i, a in enumerate(names):
        for j, b in enumerate(names):
            assert m[i, j] == pytest.approx(s.sim(a, b), abs=1e-12)
