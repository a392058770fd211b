import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgweave.corpus import (
    Chunk,
    ChunkerConfig,
    ChunkState,
    Document,
    Strategy,
    StructLabel,
    chunk_corpus,
    chunk_document,
    label_for,
    load_corpus,
    paragraph_spans,
    sentence_boundary,
)
from kgweave.errors import (
    DuplicateDocId,
    EmptyDocument,
    InvalidConfig,
    LifecycleViolation,
    ManifestNotFound,
    UnreadableFile,
)

_PIECES = list("abc xyz.?!\n\t#|`-。") + ["\n\n", "## ", "```\n", "| a |\n", "word "]
bodies = st.lists(st.sampled_from(_PIECES), min_size=1, max_size=120).map("".join)


@settings(max_examples=150, deadline=None)
@given(bodies, st.sampled_from(list(Strategy)), st.integers(5, 120), st.integers(0, 30))
def test_core_projection_reconstructs_body(body, strategy, size, overlap):
    overlap = min(overlap, size - 1)
    chunks = chunk_document(Document("d", "t", body), ChunkerConfig(strategy, size, overlap))
    assert "".join(c.core for c in chunks) == body
    assert all(b.pos > a.pos for a, b in zip(chunks, chunks[1:]))
    for a, b in zip(chunks, chunks[1:]):
        assert b.pos == a.end
    for c in chunks:
        assert c.text == body[c.pos - c.overlap:c.end]
        assert c.core


@settings(max_examples=100, deadline=None)
@given(bodies, st.integers(5, 120))
def test_fixed_size_chunks_respect_bound(body, size):
    chunks = chunk_document(Document("d", "t", body), ChunkerConfig(Strategy.FIXED_SIZE, size, size // 3))
    assert all(len(c.text) <= size for c in chunks)


def test_semantic_cuts_after_sentence_enders():
    body = "One two three. Four five six! Seven eight nine? Ten eleven"
    chunks = chunk_document(Document("d", "t", body), ChunkerConfig(Strategy.SEMANTIC, 20))
    assert [c.text for c in chunks] == ["One two three. ", "Four five six! ", "Seven eight nine? ", "Ten eleven"]


def test_semantic_without_punctuation_cuts_hard():
    body = "a" * 45
    chunks = chunk_document(Document("d", "t", body), ChunkerConfig(Strategy.SEMANTIC, 20))
    assert [len(c.text) for c in chunks] == [20, 20, 5]


def test_fullwidth_enders_need_no_following_space():
    assert sentence_boundary("第一句。第二句", 0, 7) == 4


def test_paragraph_separators_attach_to_previous_chunk():
    body = "first para\n\n\nsecond para\n\nthird"
    chunks = chunk_document(Document("d", "t", body), ChunkerConfig(Strategy.PARAGRAPH, 100))
    assert [c.text for c in chunks] == ["first para\n\n\n", "second para\n\n", "third"]


def test_empty_paragraph_runs_fold_into_neighbours():
    body = "\n\n \n\nalpha\n\n\t\n\nbeta\n\n\n"
    spans = paragraph_spans(body)
    assert "".join(body[s:e] for s, e in spans) == body
    assert all(body[s:e].strip() for s, e in spans)
    assert len(spans) == 2


def test_structural_splits_at_level_two_headings_and_fences():
    body = "# Title\nintro\n## Part A\ntext a\n```\ncode\n```\nafter\n### Deep\nmore\n| x |\n| 1 |\nend\n"
    chunks = chunk_document(Document("d", "t", body), ChunkerConfig(Strategy.STRUCTURAL, 800))
    labels = [c.struct_label for c in chunks]
    assert labels[0] is StructLabel.HEADING and chunks[0].heading_level == 1
    assert StructLabel.CODE_BLOCK in labels and StructLabel.TABLE in labels
    part_a = next(c for c in chunks if c.text.startswith("## Part A"))
    assert part_a.section == ("Title", "Part A")
    # level-3 headings do not open a new chunk
    assert not any(c.text.startswith("### Deep") for c in chunks)


def test_structural_oversized_segment_splits_secondarily():
    body = "## Head\n" + "Sentence number one is here. " * 20
    chunks = chunk_document(Document("d", "t", body), ChunkerConfig(Strategy.STRUCTURAL, 100))
    assert len(chunks) > 1
    assert all(len(c.text) <= 100 for c in chunks)
    assert "".join(c.text for c in chunks) == body


def test_chunk_ids_are_zero_padded():
    chunks = chunk_document(Document("paper", "t", "a\n\nb"), ChunkerConfig(Strategy.PARAGRAPH, 10))
    assert [c.chunk_id for c in chunks] == ["paper:0000", "paper:0001"]


def test_label_for():
    assert label_for("### Heading\nbody") == (StructLabel.HEADING, 3)
    assert label_for("- a\n- b")[0] is StructLabel.LIST_ITEM
    assert label_for("| a |")[0] is StructLabel.TABLE
    assert label_for("```py\nx\n```")[0] is StructLabel.CODE_BLOCK
    assert label_for("  \n") == (StructLabel.BODY, None)


def test_empty_document_rejected_but_corpus_maps_to_empty_list():
    with pytest.raises(EmptyDocument):
        chunk_document(Document("d", "t", ""))
    assert chunk_corpus([Document("d", "t", "")]) == {"d": []}


@pytest.mark.parametrize("size,overlap", [(0, 0), (-1, 0), (10, 10), (10, -1)])
def test_invalid_config(size, overlap):
    with pytest.raises(InvalidConfig):
        ChunkerConfig(Strategy.FIXED_SIZE, size, overlap)


def test_lifecycle_only_forward():
    c = Chunk("d:0000", "d", 0, "x", 0)
    c.advance(ChunkState.READING)
    c.advance(ChunkState.READING)
    c.advance(ChunkState.ARCHIVED)
    with pytest.raises(LifecycleViolation):
        c.advance(ChunkState.VERIFIED)


def test_chunk_roundtrip():
    c = chunk_document(Document("d", "t", "## A\nbody text\n"))[0]
    assert Chunk.from_dict(json.loads(json.dumps(c.to_dict()))) == c


def test_load_corpus(tmp_path, mini_dir):
    docs = load_corpus(mini_dir / "manifest.jsonl")
    assert [d.doc_id for d in docs] == ["convnets", "attention", "graphs"]
    with pytest.raises(ManifestNotFound):
        load_corpus(tmp_path / "nope.jsonl")
    (tmp_path / "a.md").write_text("x")
    dup = tmp_path / "dup.jsonl"
    dup.write_text('{"doc_id": "a", "path": "a.md"}\n{"doc_id": "a", "path": "a.md"}\n')
    with pytest.raises(DuplicateDocId):
        load_corpus(dup)
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"doc_id": "a", "path": "missing.md"}\n')
    with pytest.raises(UnreadableFile):
        load_corpus(bad)
