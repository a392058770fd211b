"""Hybrid retrieval over chunk ids: vector recall, graph expansion, rank fusion.

Modes:
  VECTOR  vector recall only
  KG      graph expansion from lexically matched anchor entities only
  FUSION  both streams combined by reciprocal rank fusion
  DEEP    HyperNode chain navigation, navigation hits first, then vector hits

When the graph layer fails or exceeds its time budget in FUSION or DEEP, the
result degrades to exactly the VECTOR result with ``fallback`` set.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from kgweave.errors import EmptyIndex
from kgweave.graph_store import GraphStore, IsolationScope, SearchType, normalize_name
from kgweave.sync import AlertLog
from kgweave.vector_index import Collection, EmbeddingProvider, VectorIndex, cosine

RRF_K = 60


class Mode(str, Enum):
    VECTOR = "VECTOR"
    KG = "KG"
    FUSION = "FUSION"
    DEEP = "DEEP"


@dataclass(frozen=True)
class RetrievalRequest:
    query: str
    mode: Mode = Mode.FUSION
    top_k: int = 10
    k1: int = 100
    h: int = 2
    scope: Optional[IsolationScope] = None
    kg_timeout: float = 2.0
    rrf_k: int = RRF_K

    def __post_init__(self):
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(str(self.mode).upper()))
        if self.top_k <= 0 or self.top_k > self.k1:
            raise ValueError(f"need 0 < top_k <= k1, got top_k={self.top_k} k1={self.k1}")
        if self.h < 1:
            raise ValueError("h must be >= 1")
        if self.rrf_k <= 0:
            raise ValueError("rrf_k must be positive")


@dataclass(frozen=True)
class RetrievalCandidate:
    object_id: str
    rank_vec: Optional[int]
    rank_kg: Optional[int]
    rrf_score: float
    evidence_chunk_ids: tuple[str, ...] = ()
    source: str = "VECTOR"

    def to_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "rank_vec": self.rank_vec,
            "rank_kg": self.rank_kg,
            "rrf_score": self.rrf_score,
            "evidence_chunk_ids": list(self.evidence_chunk_ids),
            "source": self.source,
        }


@dataclass
class RetrievalResult:
    candidates: list[RetrievalCandidate]
    mode: Mode
    fallback: bool = False
    alert: Optional[str] = None

    @property
    def ids(self) -> list[str]:
        return [c.object_id for c in self.candidates]


@dataclass(frozen=True)
class GraphCandidate:
    entity_id: str
    hop: int
    similarity: float
    evidence_chunk_ids: tuple[str, ...]


def rrf_score(ranks: Sequence[Optional[int]], k: int = RRF_K) -> float:
    return sum(1.0 / (k + r) for r in ranks if r is not None)


def rrf_fuse(
    stream_vec: Sequence[str], stream_kg: Sequence[str], k: int = RRF_K
) -> list[tuple[str, float, Optional[int], Optional[int]]]:
    """Fuse two rankings; returns (id, score, rank_vec, rank_kg), best first, ties by id."""
    if k <= 0:
        raise ValueError("k must be positive")
    for s in (stream_vec, stream_kg):
        if len(set(s)) != len(s):
            raise ValueError("rankings must be duplicate-free")
    rv = {x: i + 1 for i, x in enumerate(stream_vec)}
    rk = {x: i + 1 for i, x in enumerate(stream_kg)}
    fused = [(x, rrf_score((rv.get(x), rk.get(x)), k), rv.get(x), rk.get(x)) for x in set(rv) | set(rk)]
    fused.sort(key=lambda t: (-t[1], t[0]))
    return fused


def _source(rank_vec: Optional[int], rank_kg: Optional[int]) -> str:
    if rank_vec is not None and rank_kg is not None:
        return "BOTH"
    return "VECTOR" if rank_vec is not None else "KG"


class Retriever:
    def __init__(
        self,
        graph: GraphStore,
        index: VectorIndex,
        embedder: EmbeddingProvider,
        alerts: Optional[AlertLog] = None,
        neighbor_min_sim: float = 0.2,
        anchor_chunks: int = 10,
        anchor_entities: int = 5,
        analyze: Optional[Callable[[str], list[str]]] = None,
    ):
        self.graph = graph
        self.index = index
        self.embedder = embedder
        self.alerts = alerts if alerts is not None else AlertLog()
        self.neighbor_min_sim = neighbor_min_sim
        self.anchor_chunks = anchor_chunks
        self.anchor_entities = anchor_entities
        self.analyze = analyze

    # -- streams ----------------------------------------------------------

    def vector_recall(self, qv: np.ndarray, k1: int, scope: Optional[IsolationScope]) -> list[str]:
        hits = self.index.search(qv, k1, scope=scope, collection=Collection.CHUNK)
        return [h.object_id for h in hits]

    def vector_anchors(self, qv: np.ndarray, recalled: Sequence[str], scope: Optional[IsolationScope]) -> list[str]:
        """Entities mentioned by the top recalled chunks plus the nearest entity vectors."""
        anchors = set()
        for cid in recalled[: self.anchor_chunks]:
            anchors.update(self.graph.mentioned_entities(cid))
        for hit in self.index.search(
            qv, self.anchor_entities, scope=scope, collection=Collection.ENTITY, where={"node_type": "ENTITY"}
        ):
            anchors.add(hit.object_id)
        return sorted(a for a in anchors if self.graph.has(a))

    def lexical_anchors(self, query: str, scope: Optional[IsolationScope]) -> list[str]:
        """Entities whose name or alias occurs as a phrase in the query."""
        if self.analyze is not None:
            found = set()
            for name in self.analyze(query):
                found.update(e.entity_id for e in self.graph.lookup(name, scope))
            if found:
                return sorted(found)
        q = f" {normalize_name(query)} "
        found = set()
        for e in self.graph.entities(scope):
            for cand in (e.name, *e.aliases):
                c = normalize_name(cand)
                if c and f" {c} " in q:
                    found.add(e.entity_id)
                    break
        if not found:
            found.update(e.entity_id for e in self.graph.find(query, SearchType.FUZZY, 10, scope))
        return sorted(found)

    def _entity_vector(self, entity_id: str) -> Optional[np.ndarray]:
        try:
            ref = self.graph.get_entity(entity_id).embedding_ref
        except Exception:
            return None
        rec = self.index.get(ref) if ref else None
        return None if rec is None else rec.embedding

    def graph_expand(
        self,
        anchors: Sequence[str],
        h: int,
        qv: np.ndarray,
        scope: Optional[IsolationScope] = None,
        include_anchors: bool = False,
    ) -> list[GraphCandidate]:
        """Neighbours within ``h`` hops that pass the similarity filter, with evidence chunks.

        Ranked by hop distance, then query similarity (descending), then id.
        """
        if not anchors:
            return []
        dist = self.graph.bfs_distances(anchors, h, scope)
        out = []
        for eid, hop in dist.items():
            if hop == 0 and not include_anchors:
                continue
            vec = self._entity_vector(eid)
            sim = cosine(qv, vec) if vec is not None else 0.0
            if hop > 0 and (vec is None or sim < self.neighbor_min_sim):
                continue
            out.append(GraphCandidate(eid, hop, sim, tuple(self.graph.evidence_chunks(eid))))
        out.sort(key=lambda c: (c.hop, -c.similarity, c.entity_id))
        return out

    def kg_stream(self, anchors: Sequence[str], h: int, qv: np.ndarray, scope: Optional[IsolationScope]) -> list[str]:
        ranked: list[str] = []
        seen = set()
        for cand in self.graph_expand(anchors, h, qv, scope, include_anchors=True):
            for cid in cand.evidence_chunk_ids:
                if cid not in seen and (scope is None or scope.admits(self.graph.get_chunk(cid).scope)):
                    seen.add(cid)
                    ranked.append(cid)
        return ranked

    def deep_navigate(self, anchors: Sequence[str], h: int, scope: Optional[IsolationScope]) -> list[str]:
        """entity -> evidence chunks -> HyperNode -> its chunks and member entities, up to ``h`` rounds."""
        order: list[str] = []
        seen_chunks: set[str] = set()
        seen_entities = set(anchors)
        frontier = sorted(anchors)
        for _ in range(h):
            nxt: set[str] = set()
            for eid in frontier:
                for cid in self.graph.evidence_chunks(eid):
                    for hid in self.graph.hypernodes_for_chunk(cid):
                        hyper = self.graph.get_hypernode(hid)
                        for c2 in sorted({cid} | hyper.chunk_refs):
                            if c2 not in seen_chunks:
                                seen_chunks.add(c2)
                                order.append(c2)
                        nxt.update(m for m in hyper.member_ids if m not in seen_entities)
                    if cid not in seen_chunks:
                        seen_chunks.add(cid)
                        order.append(cid)
            seen_entities |= nxt
            frontier = sorted(nxt)
            if not frontier:
                break
        if scope is not None:
            order = [c for c in order if scope.admits(self.graph.get_chunk(c).scope)]
        return order

    # -- entry point ------------------------------------------------------

    def _vector_result(self, recalled: list[str], req: RetrievalRequest, fallback: bool = False,
                       alert: Optional[str] = None) -> RetrievalResult:
        cands = [
            RetrievalCandidate(cid, i + 1, None, rrf_score((i + 1,), req.rrf_k), (cid,), "VECTOR")
            for i, cid in enumerate(recalled[: req.top_k])
        ]
        return RetrievalResult(cands, req.mode, fallback, alert)

    def _bounded(self, fn: Callable[[], list[str]], timeout: float) -> list[str]:
        pool = concurrent.futures.ThreadPoolExecutor(max_workers=1)
        try:
            return pool.submit(fn).result(timeout=timeout)
        finally:
            pool.shutdown(wait=False, cancel_futures=True)

    def retrieve(self, req: RetrievalRequest) -> RetrievalResult:
        if not self.index.records(req.scope, Collection.CHUNK):
            raise EmptyIndex(f"no chunk vectors in scope {req.scope.key() if req.scope else '*'}")
        qv = self.embedder.embed(req.query)
        recalled = self.vector_recall(qv, req.k1, req.scope)

        if req.mode is Mode.VECTOR:
            return self._vector_result(recalled, req)

        if req.mode is Mode.KG:
            anchors = self.lexical_anchors(req.query, req.scope)
            kg = self.kg_stream(anchors, req.h, qv, req.scope)
            cands = [
                RetrievalCandidate(cid, None, i + 1, rrf_score((i + 1,), req.rrf_k), (cid,), "KG")
                for i, cid in enumerate(kg[: req.top_k])
            ]
            return RetrievalResult(cands, req.mode)

        if req.mode is Mode.DEEP:
            anchors = self.lexical_anchors(req.query, req.scope)
            if anchors:
                try:
                    nav = self._bounded(lambda: self.deep_navigate(anchors, req.h, req.scope), req.kg_timeout)
                except Exception as exc:
                    return self._fallback(recalled, req, exc)
                return self._merge_deep(nav, recalled, req)

        def kg_job() -> list[str]:
            anchors = self.vector_anchors(qv, recalled, req.scope)
            return self.kg_stream(anchors, req.h, qv, req.scope)

        try:
            kg = self._bounded(kg_job, req.kg_timeout)
        except Exception as exc:
            return self._fallback(recalled, req, exc)
        fused = rrf_fuse(recalled, kg, req.rrf_k)[: req.top_k]
        cands = [RetrievalCandidate(x, rv, rk, s, (x,), _source(rv, rk)) for x, s, rv, rk in fused]
        return RetrievalResult(cands, req.mode)

    def _fallback(self, recalled: list[str], req: RetrievalRequest, exc: BaseException) -> RetrievalResult:
        alert = self.alerts.append(f"query:{req.query[:40]}", "retrieval", "fallback", repr(exc))
        return self._vector_result(recalled, req, fallback=True, alert=f"{alert.phase}:{alert.action}")

    def _merge_deep(self, nav: list[str], recalled: list[str], req: RetrievalRequest) -> RetrievalResult:
        rv = {x: i + 1 for i, x in enumerate(recalled)}
        rk = {x: i + 1 for i, x in enumerate(nav)}
        order = list(nav) + [x for x in recalled if x not in rk]
        cands = [
            RetrievalCandidate(x, rv.get(x), rk.get(x), rrf_score((rv.get(x), rk.get(x)), req.rrf_k), (x,),
                               _source(rv.get(x), rk.get(x)))
            for x in order[: req.top_k]
        ]
        return RetrievalResult(cands, req.mode)
