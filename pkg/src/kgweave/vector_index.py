"""Dense-vector storage with exact, filtered nearest-neighbour search.

Scores follow ``1 / (1 + ||q - m||_2)``: 1.0 at zero distance, strictly
decreasing with distance, always in (0, 1].
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, Protocol, Sequence

import numpy as np

from kgweave.errors import DegenerateVector, DimensionMismatch
from kgweave.graph_store import IsolationScope
from kgweave.jsonio import atomic_write, dumps_line, read_jsonl

FORMAT_VERSION = 1
DEFAULT_DIM = 64


class Collection(str, Enum):
    CHUNK = "CHUNK"
    ENTITY = "ENTITY"


@dataclass(frozen=True)
class VectorRecord:
    vec_id: str
    object_id: str
    collection: Collection
    embedding: np.ndarray = field(repr=False, compare=False)
    scope: IsolationScope = field(default_factory=IsolationScope)
    payload: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SearchHit:
    object_id: str
    score: float
    vec_id: str
    collection: Collection
    payload: Mapping[str, Any]


class EmbeddingProvider(Protocol):
    dimension: int
    deterministic: bool

    def embed(self, text: str) -> np.ndarray: ...


def is_degenerate(vec: np.ndarray) -> bool:
    return not np.any(vec)


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


class HashingEmbedder:
    """Deterministic stand-in for a neural text encoder.

    Counts character n-grams of the case-folded, whitespace-collapsed text,
    hashes each gram into one of ``dimension`` buckets and L2-normalises.
    Blank text maps to the zero vector, which the index refuses.
    """

    deterministic = True

    def __init__(self, dimension: int = DEFAULT_DIM, ngram_sizes: Sequence[int] = (2, 3, 4)):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.ngram_sizes = tuple(ngram_sizes)

    def _bucket(self, gram: str) -> int:
        h = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(h, "little") % self.dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        norm_text = " ".join(re.sub(r"[_\W]+", " ", text.casefold()).split())
        if not norm_text:
            return vec
        padded = f" {norm_text} "
        for n in self.ngram_sizes:
            for i in range(len(padded) - n + 1):
                vec[self._bucket(padded[i:i + n])] += 1.0
        return vec / np.linalg.norm(vec)


class StaticEmbedder:
    """Lookup-table embedder for fixtures; unknown texts fall through to ``fallback``."""

    deterministic = True

    def __init__(self, table: Mapping[str, Sequence[float]], fallback: Optional[EmbeddingProvider] = None):
        vectors = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        dims = {v.shape[0] for v in vectors.values()}
        if fallback is not None:
            dims.add(fallback.dimension)
        if len(dims) != 1:
            raise DimensionMismatch(f"inconsistent dimensions {sorted(dims)}")
        self.dimension = dims.pop()
        self._table = vectors
        self._fallback = fallback

    def embed(self, text: str) -> np.ndarray:
        if text in self._table:
            return self._table[text].copy()
        if self._fallback is None:
            return np.zeros(self.dimension)
        return self._fallback.embed(text)


def vec_id_for(collection: Collection, object_id: str, scope: IsolationScope) -> str:
    h = hashlib.blake2b(
        f"{Collection(collection).value}\x1f{object_id}\x1f{scope.key()}".encode("utf-8"),
        digest_size=8,
    )
    return "vec-" + h.hexdigest()


def _matches(payload: Mapping[str, Any], where: Mapping[str, Any]) -> bool:
    return all(payload.get(k) == v for k, v in where.items())


class VectorIndex:
    """Brute-force index; one live record per (collection, object_id, scope)."""

    def __init__(self, dimension: int = DEFAULT_DIM):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._lock = threading.RLock()
        self._records: dict[str, VectorRecord] = {}
        self._matrix: Optional[tuple[list[str], np.ndarray]] = None

    def __len__(self) -> int:
        return len(self._records)

    def insert(
        self,
        object_id: str,
        collection: Collection,
        embedding: Sequence[float],
        scope: IsolationScope,
        payload: Optional[Mapping[str, Any]] = None,
    ) -> str:
        vec = np.array(embedding, dtype=np.float64).reshape(-1)
        if vec.shape[0] != self.dimension:
            raise DimensionMismatch(f"expected dimension {self.dimension}, got {vec.shape[0]}")
        if is_degenerate(vec):
            raise DegenerateVector(f"refusing zero vector for {object_id}")
        if not np.all(np.isfinite(vec)):
            raise DegenerateVector(f"non-finite vector for {object_id}")
        collection = Collection(collection)
        vec.setflags(write=False)
        vec_id = vec_id_for(collection, object_id, scope)
        rec = VectorRecord(vec_id, object_id, collection, vec, scope, dict(payload or {}))
        with self._lock:
            self._records[vec_id] = rec
            self._matrix = None
        return vec_id

    def delete(self, vec_id: str) -> bool:
        with self._lock:
            self._matrix = None
            return self._records.pop(vec_id, None) is not None

    def get(self, vec_id: str) -> Optional[VectorRecord]:
        with self._lock:
            return self._records.get(vec_id)

    def records(
        self,
        scope: Optional[IsolationScope] = None,
        collection: Optional[Collection] = None,
    ) -> list[VectorRecord]:
        with self._lock:
            recs = [self._records[k] for k in sorted(self._records)]
        return [
            r
            for r in recs
            if (scope is None or scope.admits(r.scope))
            and (collection is None or r.collection == Collection(collection))
        ]

    def _snapshot_matrix(self) -> tuple[list[str], np.ndarray, dict[str, VectorRecord]]:
        with self._lock:
            records = dict(self._records)
            if self._matrix is None:
                ids = sorted(records)
                mat = (
                    np.vstack([records[i].embedding for i in ids])
                    if ids
                    else np.zeros((0, self.dimension))
                )
                self._matrix = (ids, mat)
            ids, mat = self._matrix
        return ids, mat, records

    def search(
        self,
        q: Sequence[float],
        k1: int = 100,
        scope: Optional[IsolationScope] = None,
        collection: Optional[Collection] = None,
        where: Optional[Mapping[str, Any]] = None,
    ) -> list[SearchHit]:
        """Top-``k1`` records by score, ties broken by object_id ascending.

        ``where`` matches payload keys exactly, e.g. ``{"node_type": "ENTITY"}``.
        """
        qv = np.asarray(q, dtype=np.float64).reshape(-1)
        if qv.shape[0] != self.dimension:
            raise DimensionMismatch(f"expected dimension {self.dimension}, got {qv.shape[0]}")
        if k1 <= 0:
            raise ValueError("k1 must be positive")
        ids, mat, records = self._snapshot_matrix()
        if not ids:
            return []
        coll = Collection(collection) if collection is not None else None
        keep = [
            i
            for i, vid in enumerate(ids)
            if (scope is None or scope.admits(records[vid].scope))
            and (coll is None or records[vid].collection == coll)
            and (where is None or _matches(records[vid].payload, where))
        ]
        if not keep:
            return []
        sub = mat[keep]
        dist = np.sqrt(np.sum((sub - qv) ** 2, axis=1))
        scores = 1.0 / (1.0 + dist)
        hits = []
        for j, i in enumerate(keep):
            rec = records[ids[i]]
            hits.append(SearchHit(rec.object_id, float(scores[j]), rec.vec_id, rec.collection, rec.payload))
        hits.sort(key=lambda h: (-h.score, h.object_id, h.vec_id))
        return hits[:k1]

    # -- snapshot ---------------------------------------------------------

    def dump(self, path: str | Path) -> None:
        """Header ``{dim, count}`` then one record per line in vec_id order."""
        recs = self.records()
        lines = [dumps_line({"format_version": FORMAT_VERSION, "dim": self.dimension, "count": len(recs)})]
        for r in recs:
            lines.append(
                dumps_line(
                    {
                        "vec_id": r.vec_id,
                        "object_id": r.object_id,
                        "collection": r.collection.value,
                        "embedding": [float(x) for x in r.embedding],
                        "scope": r.scope.to_dict(),
                        "payload": dict(r.payload),
                    }
                )
            )
        atomic_write(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        it = read_jsonl(path)
        header = next(it)
        idx = cls(header["dim"])
        for rec in it:
            vec = np.array(rec["embedding"], dtype=np.float64)
            vec.setflags(write=False)
            idx._records[rec["vec_id"]] = VectorRecord(
                rec["vec_id"],
                rec["object_id"],
                Collection(rec["collection"]),
                vec,
                IsolationScope.from_dict(rec["scope"]),
                rec["payload"],
            )
        if len(idx._records) != header["count"]:
            raise ValueError(f"{path}: header count {header['count']} != {len(idx._records)} records")
        return idx
