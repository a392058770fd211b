import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from kgweave.errors import DegenerateVector, DimensionMismatch
from kgweave.graph_store import IsolationScope
from kgweave.vector_index import (
    Collection,
    HashingEmbedder,
    StaticEmbedder,
    VectorIndex,
    cosine,
    vec_id_for,
)

S1 = IsolationScope("t", "r1", "d")
S2 = IsolationScope("t", "r2", "d")


def test_score_is_inverse_distance():
    idx = VectorIndex(2)
    idx.insert("a", Collection.CHUNK, [3.0, 4.0], S1)
    hit = idx.search([0.0, 0.0], 1)[0]
    assert hit.score == pytest.approx(1 / 6)  # distance 5


def test_insert_rejects_bad_vectors():
    idx = VectorIndex(3)
    with pytest.raises(DimensionMismatch):
        idx.insert("a", Collection.CHUNK, [1.0, 2.0], S1)
    with pytest.raises(DegenerateVector):
        idx.insert("a", Collection.CHUNK, [0.0, 0.0, 0.0], S1)
    with pytest.raises(DegenerateVector):
        idx.insert("a", Collection.CHUNK, [np.nan, 1.0, 0.0], S1)
    with pytest.raises(DimensionMismatch):
        idx.search([1.0], 1)
    with pytest.raises(ValueError):
        idx.search([1.0, 0.0, 0.0], 0)


def test_one_record_per_object_and_scope():
    idx = VectorIndex(2)
    v1 = idx.insert("a", Collection.ENTITY, [1.0, 0.0], S1)
    v2 = idx.insert("a", Collection.ENTITY, [0.0, 1.0], S1)
    v3 = idx.insert("a", Collection.ENTITY, [0.0, 1.0], S2)
    assert v1 == v2 != v3
    assert len(idx) == 2
    assert list(idx.get(v1).embedding) == [0.0, 1.0]
    assert v1 == vec_id_for(Collection.ENTITY, "a", S1)


def test_filters():
    idx = VectorIndex(2)
    idx.insert("c1", Collection.CHUNK, [1.0, 0.0], S1, {"doc_id": "x"})
    idx.insert("c2", Collection.CHUNK, [1.0, 0.1], S1.for_document("y"), {"doc_id": "y"})
    idx.insert("e1", Collection.ENTITY, [1.0, 0.0], S1, {"node_type": "ENTITY"})
    idx.insert("c3", Collection.CHUNK, [1.0, 0.0], S2)
    assert [h.object_id for h in idx.search([1, 0], 10, scope=S1, collection=Collection.CHUNK)] == ["c1", "c2"]
    assert [h.object_id for h in idx.search([1, 0], 10, where={"doc_id": "y"})] == ["c2"]
    assert [h.object_id for h in idx.search([1, 0], 10, scope=S1.for_document("z"))] == ["c1", "e1"]
    assert idx.search([1, 0], 10, scope=IsolationScope("other")) == []


def test_dump_load_roundtrip(tmp_path):
    idx = VectorIndex(3)
    idx.insert("a", Collection.CHUNK, [1.0, 2.0, 3.0], S1, {"k": 1})
    idx.insert("b", Collection.ENTITY, [0.5, 0.0, 0.0], S2)
    idx.dump(tmp_path / "v.jsonl")
    again = VectorIndex.load(tmp_path / "v.jsonl")
    assert [(r.vec_id, r.object_id, list(r.embedding), dict(r.payload)) for r in again.records()] == [
        (r.vec_id, r.object_id, list(r.embedding), dict(r.payload)) for r in idx.records()
    ]


def test_hashing_embedder_is_deterministic_and_normalised():
    e = HashingEmbedder(32)
    v = e.embed("Graph Attention Network")
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.array_equal(v, HashingEmbedder(32).embed("graph   attention network!"))
    assert not np.any(e.embed("  ...  "))
    assert cosine(e.embed("graph attention"), e.embed("graph attention networks")) > cosine(
        e.embed("graph attention"), e.embed("stochastic gradient descent")
    )


def test_static_embedder():
    e = StaticEmbedder({"a": [1, 0]}, fallback=None)
    assert list(e.embed("a")) == [1, 0]
    assert not np.any(e.embed("b"))
    with pytest.raises(DimensionMismatch):
        StaticEmbedder({"a": [1, 0], "b": [1, 0, 0]})


def test_cosine_of_zero_vector_is_zero():
    assert cosine([0, 0], [1, 0]) == 0.0


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(arrays(np.float64, 4, elements=finite), min_size=1, max_size=40),
    arrays(np.float64, 4, elements=finite),
    st.integers(1, 10),
)
def test_search_matches_exhaustive(vectors, q, k):
    idx = VectorIndex(4)
    rows = []
    for i, v in enumerate(vectors):
        if not np.any(v):
            continue
        idx.insert(f"o{i:03d}", Collection.CHUNK, v, S1)
        rows.append((f"o{i:03d}", v.tolist(), None))
    got = idx.search(q, k)
    want = oracles.exhaustive_search(rows, q.tolist(), k, lambda _: True)
    assert [h.object_id for h in got] == [w[0] for w in want] or all(
        abs(h.score - w[1]) < 1e-12 for h, w in zip(got, want)
    )
    for h, w in zip(got, want):
        assert h.score == pytest.approx(w[1], abs=1e-12)
