"""Document ingestion and chunking.

Four strategies are supported: FIXED_SIZE, SEMANTIC, PARAGRAPH and
STRUCTURAL.  All of them produce chunks whose non-overlapped parts
(``Chunk.core``) tile the source body exactly, so

    "".join(c.core for c in chunks) == doc.body

holds for every strategy and every overlap setting.  Overlap is only ever a
prefix copied from the tail of the previous piece; ``Chunk.pos`` always
points at the start of the non-overlapped part.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

from kgweave.errors import (
    DuplicateDocId,
    EmptyDocument,
    InvalidConfig,
    LifecycleViolation,
    ManifestNotFound,
    UnreadableFile,
)

SENTENCE_ENDERS = frozenset(".?!。？！")
# full-width enders terminate a sentence without trailing whitespace
_FULLWIDTH_ENDERS = frozenset("。？！")

_HEADING_RE = re.compile(r"^ {0,3}(#{1,6})[ \t]+\S")
_FENCE_RE = re.compile(r"^ {0,3}(`{3,}|~{3,})")
_TABLE_RE = re.compile(r"^\s*\|")
_LIST_RE = re.compile(r"^\s*(?:[-*+]|\d+[.)])\s+\S")
_PARA_SEP_RE = re.compile(r"\n(?:[ \t]*\n)+")


class Strategy(str, Enum):
    FIXED_SIZE = "FIXED_SIZE"
    SEMANTIC = "SEMANTIC"
    PARAGRAPH = "PARAGRAPH"
    STRUCTURAL = "STRUCTURAL"


class StructLabel(str, Enum):
    HEADING = "HEADING"
    BODY = "BODY"
    LIST_ITEM = "LIST_ITEM"
    CODE_BLOCK = "CODE_BLOCK"
    TABLE = "TABLE"


class ChunkState(str, Enum):
    PENDING = "PENDING"
    READING = "READING"
    VERIFIED = "VERIFIED"
    ARCHIVED = "ARCHIVED"

    @property
    def order(self) -> int:
        return _STATE_ORDER[self]


_STATE_ORDER = {s: i for i, s in enumerate(ChunkState)}


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str
    source_uri: Optional[str] = None


@dataclass(frozen=True)
class ChunkerConfig:
    strategy: Strategy = Strategy.STRUCTURAL
    chunk_size: int = 800
    chunk_overlap: int = 0

    def __post_init__(self):
        if self.chunk_size <= 0:
            raise InvalidConfig(f"chunk_size must be positive, got {self.chunk_size}")
        if not 0 <= self.chunk_overlap < self.chunk_size:
            raise InvalidConfig(
                f"chunk_overlap must satisfy 0 <= overlap < size, got {self.chunk_overlap}"
            )
        object.__setattr__(self, "strategy", Strategy(self.strategy))


@dataclass
class Chunk:
    chunk_id: str
    doc_id: str
    index: int
    text: str
    pos: int
    struct_label: StructLabel = StructLabel.BODY
    heading_level: Optional[int] = None
    overlap: int = 0
    section: tuple[str, ...] = ()
    state: ChunkState = ChunkState.PENDING

    @property
    def core(self) -> str:
        """Text without the overlap prefix copied from the previous chunk."""
        return self.text[self.overlap:]

    @property
    def end(self) -> int:
        return self.pos + len(self.core)

    def advance(self, new_state: ChunkState) -> None:
        new_state = ChunkState(new_state)
        if new_state.order < self.state.order:
            raise LifecycleViolation(
                f"{self.chunk_id}: cannot move from {self.state.value} to {new_state.value}"
            )
        self.state = new_state

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "index": self.index,
            "text": self.text,
            "pos": self.pos,
            "struct_label": self.struct_label.value,
            "heading_level": self.heading_level,
            "overlap": self.overlap,
            "section": list(self.section),
            "state": self.state.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Chunk":
        return cls(
            chunk_id=d["chunk_id"],
            doc_id=d["doc_id"],
            index=d["index"],
            text=d["text"],
            pos=d["pos"],
            struct_label=StructLabel(d["struct_label"]),
            heading_level=d.get("heading_level"),
            overlap=d.get("overlap", 0),
            section=tuple(d.get("section", ())),
            state=ChunkState(d.get("state", "PENDING")),
        )


def chunk_id_for(doc_id: str, index: int) -> str:
    return f"{doc_id}:{index:04d}"


# ---------------------------------------------------------------------------
# boundary finders: return a cut position in (lo, hi], or None
# ---------------------------------------------------------------------------

Boundary = Callable[[str, int, int], Optional[int]]


def _skip_ws(body: str, pos: int, hi: int) -> int:
    while pos < hi and body[pos].isspace():
        pos += 1
    return pos


def sentence_boundary(body: str, lo: int, hi: int) -> Optional[int]:
    for j in range(hi - 1, lo - 1, -1):
        ch = body[j]
        if ch not in SENTENCE_ENDERS:
            continue
        nxt = j + 1
        if ch in _FULLWIDTH_ENDERS or nxt >= len(body) or body[nxt].isspace():
            return _skip_ws(body, nxt, hi)
    return None


def paragraph_boundary(body: str, lo: int, hi: int) -> Optional[int]:
    j = body.rfind("\n\n", lo, hi)
    while j > lo:
        cut = _skip_ws(body, j, hi)
        if cut > lo:
            return cut
        j = body.rfind("\n\n", lo, j)
    return None


def line_boundary(body: str, lo: int, hi: int) -> Optional[int]:
    j = body.rfind("\n", lo, hi)
    return j + 1 if j >= lo else None


def _first_of(*finders: Boundary) -> Boundary:
    def find(body: str, lo: int, hi: int) -> Optional[int]:
        for f in finders:
            cut = f(body, lo, hi)
            if cut is not None and cut > lo:
                return cut
        return None

    return find


def split_span(
    body: str,
    start: int,
    end: int,
    size: int,
    overlap: int = 0,
    boundary: Optional[Boundary] = None,
) -> list[tuple[int, int, int]]:
    """Cut ``body[start:end]`` into pieces of at most ``size`` characters.

    Returns ``(text_start, core_start, cut)`` triples.  Pieces after the first
    carry up to ``overlap`` characters of the previous piece as a prefix; the
    core lengths shrink accordingly so every piece stays within ``size``.
    Without a boundary finder (or when none is found) the cut is hard.
    """
    pieces: list[tuple[int, int, int]] = []
    cur = start
    while cur < end:
        o = min(overlap, cur - start) if pieces else 0
        limit = cur + size - o
        if limit >= end:
            cut = end
        else:
            cut = boundary(body, cur, limit) if boundary else None
            if cut is None or cut <= cur:
                cut = limit
        pieces.append((cur - o, cur, cut))
        cur = cut
    return pieces


def label_for(text: str) -> tuple[StructLabel, Optional[int]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return StructLabel.BODY, None
    first = lines[0]
    m = _HEADING_RE.match(first)
    if m:
        return StructLabel.HEADING, len(m.group(1))
    if _FENCE_RE.match(first):
        return StructLabel.CODE_BLOCK, None
    if _TABLE_RE.match(first):
        return StructLabel.TABLE, None
    if all(_LIST_RE.match(ln) for ln in lines):
        return StructLabel.LIST_ITEM, None
    return StructLabel.BODY, None


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------

@dataclass
class _Piece:
    text_start: int
    core_start: int
    end: int
    label: Optional[StructLabel] = None
    level: Optional[int] = None
    section: tuple[str, ...] = ()


def _fixed(body: str, cfg: ChunkerConfig) -> list[_Piece]:
    return [_Piece(*p) for p in split_span(body, 0, len(body), cfg.chunk_size, cfg.chunk_overlap)]


def _semantic(body: str, cfg: ChunkerConfig) -> list[_Piece]:
    return [
        _Piece(*p)
        for p in split_span(body, 0, len(body), cfg.chunk_size, 0, sentence_boundary)
    ]


def paragraph_spans(body: str) -> list[tuple[int, int]]:
    """Paragraph spans with each separator run attached to the paragraph before it.

    Whitespace-only spans (leading blank lines, runs of empty paragraphs) are
    folded into a neighbour so that no chunk is empty.
    """
    spans: list[tuple[int, int]] = []
    prev = 0
    for m in _PARA_SEP_RE.finditer(body):
        spans.append((prev, m.end()))
        prev = m.end()
    if prev < len(body):
        spans.append((prev, len(body)))

    merged: list[tuple[int, int]] = []
    carry: Optional[int] = None
    for s, e in spans:
        if carry is not None:
            s, carry = carry, None
        if not body[s:e].strip():
            carry = s
            continue
        merged.append((s, e))
    if carry is not None:
        if merged:
            merged[-1] = (merged[-1][0], len(body))
        else:
            merged.append((carry, len(body)))
    return merged


def _paragraph(body: str, cfg: ChunkerConfig) -> list[_Piece]:
    pieces: list[_Piece] = []
    for s, e in paragraph_spans(body):
        for p in split_span(body, s, e, cfg.chunk_size, cfg.chunk_overlap, sentence_boundary):
            pieces.append(_Piece(*p))
    return pieces


@dataclass
class _Segment:
    start: int
    kind: StructLabel
    level: Optional[int]
    section: tuple[str, ...]


def _structural_segments(body: str) -> Optional[list[tuple[int, int, _Segment]]]:
    """Split at level-1/2 headings, code-fence boundaries and table boundaries.

    Returns None when the body carries no recognisable markup.
    """
    lines = body.splitlines(keepends=True)
    offsets = []
    off = 0
    for ln in lines:
        offsets.append(off)
        off += len(ln)

    segments: list[_Segment] = []
    stack: list[tuple[int, str]] = []
    saw_structure = False
    fence: Optional[str] = None
    in_table = False

    def section() -> tuple[str, ...]:
        return tuple(t for _, t in stack)

    for i, ln in enumerate(lines):
        start = offsets[i]
        if fence is not None:
            if ln.lstrip().startswith(fence):
                fence = None
                # the line after a closing fence opens a new segment
                if i + 1 < len(lines):
                    segments.append(_Segment(offsets[i + 1], StructLabel.BODY, None, section()))
            continue

        fm = _FENCE_RE.match(ln)
        if fm:
            saw_structure = True
            fence = fm.group(1)[0] * 3
            in_table = False
            segments.append(_Segment(start, StructLabel.CODE_BLOCK, None, section()))
            continue

        if _TABLE_RE.match(ln):
            saw_structure = True
            if not in_table:
                in_table = True
                segments.append(_Segment(start, StructLabel.TABLE, None, section()))
            continue
        if in_table:
            in_table = False
            segments.append(_Segment(start, StructLabel.BODY, None, section()))

        hm = _HEADING_RE.match(ln)
        if hm:
            saw_structure = True
            level = len(hm.group(1))
            while stack and stack[-1][0] >= level:
                stack.pop()
            stack.append((level, ln.strip().lstrip("#").strip()))
            if level <= 2:
                segments.append(_Segment(start, StructLabel.HEADING, level, section()))

    if not saw_structure:
        return None
    if not segments or segments[0].start != 0:
        segments.insert(0, _Segment(0, StructLabel.BODY, None, ()))

    # collapse segments that start at the same offset (keep the later, more specific one)
    dedup: list[_Segment] = []
    for seg in segments:
        if dedup and dedup[-1].start == seg.start:
            dedup[-1] = seg
        else:
            dedup.append(seg)

    out = []
    for k, seg in enumerate(dedup):
        end = dedup[k + 1].start if k + 1 < len(dedup) else len(body)
        if end > seg.start:
            out.append((seg.start, end, seg))
    return out


_STRUCT_SPLIT = _first_of(paragraph_boundary, sentence_boundary, line_boundary)


def _structural(body: str, cfg: ChunkerConfig) -> list[_Piece]:
    segs = _structural_segments(body)
    if segs is None:
        return _paragraph(body, cfg)

    pieces: list[_Piece] = []
    carry: Optional[int] = None
    for idx, (s, e, seg) in enumerate(segs):
        if carry is not None:
            s, carry = carry, None
        if not body[s:e].strip() and idx + 1 < len(segs):
            carry = s
            continue
        if seg.kind in (StructLabel.CODE_BLOCK, StructLabel.TABLE):
            finder: Boundary = line_boundary
            label, level = seg.kind, None
        else:
            finder = _STRUCT_SPLIT
            label, level = label_for(body[s:e])
        split = split_span(body, s, e, cfg.chunk_size, cfg.chunk_overlap, finder)
        for n, (ts, cs, ce) in enumerate(split):
            if n == 0:
                pieces.append(_Piece(ts, cs, ce, label, level, seg.section))
            else:
                cont_label = label if label in (StructLabel.CODE_BLOCK, StructLabel.TABLE) else None
                pieces.append(_Piece(ts, cs, ce, cont_label, None, seg.section))
    if not pieces and segs:
        pieces.append(_Piece(0, 0, len(body)))
    return pieces


_STRATEGIES = {
    Strategy.FIXED_SIZE: _fixed,
    Strategy.SEMANTIC: _semantic,
    Strategy.PARAGRAPH: _paragraph,
    Strategy.STRUCTURAL: _structural,
}


def chunk_document(doc: Document, cfg: Optional[ChunkerConfig] = None) -> list[Chunk]:
    """Split ``doc`` into position-annotated chunks under ``cfg.strategy``."""
    cfg = cfg or ChunkerConfig()
    if not doc.body:
        raise EmptyDocument(f"document {doc.doc_id!r} has an empty body")

    chunks = []
    for i, p in enumerate(_STRATEGIES[cfg.strategy](doc.body, cfg)):
        text = doc.body[p.text_start:p.end]
        if p.label is None:
            label, level = label_for(doc.body[p.core_start:p.end])
        else:
            label, level = p.label, p.level
        chunks.append(
            Chunk(
                chunk_id=chunk_id_for(doc.doc_id, i),
                doc_id=doc.doc_id,
                index=i,
                text=text,
                pos=p.core_start,
                struct_label=label,
                heading_level=level,
                overlap=p.core_start - p.text_start,
                section=p.section,
            )
        )
    return chunks


def load_corpus(manifest_path: str | Path) -> list[Document]:
    """Read a JSONL manifest of ``{doc_id, path, title}`` records.

    Paths are resolved relative to the manifest's directory.  A record with a
    ``format_version`` key and no ``doc_id`` is treated as a header.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise ManifestNotFound(str(manifest_path))
    try:
        raw = manifest_path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFile(f"{manifest_path}: {exc}") from exc

    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, line in enumerate(raw.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise UnreadableFile(f"{manifest_path}:{lineno}: {exc}") from exc
        if "doc_id" not in rec and "format_version" in rec:
            continue
        doc_id = rec["doc_id"]
        if doc_id in seen:
            raise DuplicateDocId(doc_id)
        seen.add(doc_id)
        path = Path(rec["path"])
        if not path.is_absolute():
            path = manifest_path.parent / path
        try:
            body = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise UnreadableFile(f"{path}: {exc}") from exc
        docs.append(Document(doc_id, rec.get("title", doc_id), body, str(path)))
    return docs


def chunk_corpus(docs: list[Document], cfg: Optional[ChunkerConfig] = None) -> dict[str, list[Chunk]]:
    """Chunk every document; empty documents map to an empty chunk list."""
    return {d.doc_id: (chunk_document(d, cfg) if d.body else []) for d in docs}
