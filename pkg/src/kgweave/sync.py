"""Keeps the graph and the vector index aligned without a shared transaction.

Every vectorized object goes through the same sequence: graph write, embed,
vector insert, reference write-back.  A failed embed or insert compensates
the graph write (fresh objects are removed, pre-existing ones are marked
stale so earlier committed knowledge survives); a failed write-back keeps
both primary writes and leaves an alert for the consistency checker.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from kgweave.clock import Clock, utc_now
from kgweave.corpus import Chunk
from kgweave.errors import (
    DegenerateVector,
    EmptyMemberSet,
    MissingMemberVector,
    NotFound,
    VectorWriteError,
)
from kgweave.graph_store import (
    ChunkNode,
    DocumentNode,
    Entity,
    GraphStore,
    HyperNode,
    IsolationScope,
    document_node_id,
    hyper_id_for,
)
from kgweave.jsonio import read_jsonl, write_jsonl
from kgweave.vector_index import Collection, EmbeddingProvider, VectorIndex, is_degenerate

log = logging.getLogger(__name__)

Vectorized = Union[Entity, HyperNode, ChunkNode]

SYNC_PHASES = frozenset({"graph_write", "embed", "vector_insert", "write_back"})


class SyncStatus(str, Enum):
    SUCCESS = "SUCCESS"
    FAILED = "FAILED"


@dataclass(frozen=True)
class SyncOutcome:
    status: SyncStatus
    kg_id: Optional[str] = None
    vec_id: Optional[str] = None
    alert: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status is SyncStatus.SUCCESS


@dataclass(frozen=True)
class Alert:
    seq: int
    timestamp: str
    object_id: str
    phase: str
    action: str
    detail: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class AlertLog:
    """Append-only alert ledger.  Resolution is itself an appended entry."""

    def __init__(self, clock: Clock = utc_now):
        self._entries: list[Alert] = []
        self.clock = clock

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(list(self._entries))

    def append(self, object_id: str, phase: str, action: str, detail: str = "") -> Alert:
        alert = Alert(len(self._entries), self.clock(), object_id, phase, action, detail)
        self._entries.append(alert)
        log.info("sync alert %s %s %s: %s", object_id, phase, action, detail)
        return alert

    def resolve(self, object_id: str, detail: str = "") -> Optional[Alert]:
        if object_id in self.pending():
            return self.append(object_id, "repair", "resolved", detail)
        return None

    def pending(self) -> list[str]:
        last: dict[str, Alert] = {}
        for a in self._entries:
            if a.phase in SYNC_PHASES or a.action == "resolved":
                last[a.object_id] = a
        return sorted(oid for oid, a in last.items() if a.action != "resolved")

    def entries(self, phase: Optional[str] = None) -> list[Alert]:
        return [a for a in self._entries if phase is None or a.phase == phase]

    def dump(self, path: str | Path) -> None:
        write_jsonl(path, (a.to_dict() for a in self._entries))

    @classmethod
    def load(cls, path: str | Path, clock: Clock = utc_now) -> "AlertLog":
        log_ = cls(clock)
        log_._entries = [Alert(**r) for r in read_jsonl(path)]
        return log_


def weighted_centroid(vectors: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """Sum of ``w * v`` divided by the member *count* (not by the weight sum)."""
    if len(vectors) == 0:
        raise EmptyMemberSet("centroid of an empty member set")
    if len(vectors) != len(weights):
        raise ValueError("vectors and weights differ in length")
    acc = np.zeros_like(np.asarray(vectors[0], dtype=np.float64))
    for v, w in zip(vectors, weights):
        acc = acc + float(w) * np.asarray(v, dtype=np.float64)
    return acc / len(vectors)


@dataclass
class ConsistencyReport:
    dangling_refs: list[tuple[str, str]] = field(default_factory=list)
    orphan_vectors: list[tuple[str, str]] = field(default_factory=list)
    unreferenced: list[tuple[str, str]] = field(default_factory=list)
    pending_alerts: list[str] = field(default_factory=list)
    unsynced: list[str] = field(default_factory=list)

    @property
    def is_clean(self) -> bool:
        return not (
            self.dangling_refs
            or self.orphan_vectors
            or self.unreferenced
            or self.pending_alerts
            or self.unsynced
        )

    def to_dict(self) -> dict:
        return {
            "clean": self.is_clean,
            "dangling_refs": [list(p) for p in self.dangling_refs],
            "orphan_vectors": [list(p) for p in self.orphan_vectors],
            "unreferenced": [list(p) for p in self.unreferenced],
            "pending_alerts": list(self.pending_alerts),
            "unsynced": list(self.unsynced),
        }


def _object_id(x: Vectorized) -> str:
    if isinstance(x, Entity):
        return x.entity_id
    if isinstance(x, HyperNode):
        return x.hyper_id
    if isinstance(x, ChunkNode):
        return x.chunk_id
    raise TypeError(f"{type(x).__name__} carries no vector")


class SyncCoordinator:
    def __init__(
        self,
        graph: GraphStore,
        index: VectorIndex,
        embedder: EmbeddingProvider,
        alerts: Optional[AlertLog] = None,
    ):
        self.graph = graph
        self.index = index
        self.embedder = embedder
        self.alerts = alerts if alerts is not None else AlertLog()

    # -- core protocol ----------------------------------------------------

    def _vector_for(self, x: Vectorized) -> np.ndarray:
        if isinstance(x, HyperNode):
            return self.hypernode_centroid(x)
        vec = self.embedder.embed(x.text)
        if is_degenerate(vec):
            raise DegenerateVector(f"empty embedding for {_object_id(x)}")
        return vec

    @staticmethod
    def _placement(x: Vectorized) -> tuple[Collection, dict]:
        if isinstance(x, Entity):
            return Collection.ENTITY, {
                "node_type": "ENTITY",
                "name": x.name,
                "entity_type": x.entity_type,
                "kg_node_id": x.entity_id,
            }
        if isinstance(x, HyperNode):
            return Collection.ENTITY, {"node_type": "HYPERNODE", "hyper": True, "kg_node_id": x.hyper_id}
        return Collection.CHUNK, {"node_type": "CHUNK", "doc_id": x.doc_id, "kg_node_id": x.chunk_id}

    def sync_object(self, x: Vectorized) -> SyncOutcome:
        oid = _object_id(x)
        fresh = not self.graph.has(oid)
        if not fresh and x.embedding_ref is None:
            prev = self.graph.get_object(oid)
            x = dataclasses.replace(x, embedding_ref=getattr(prev, "embedding_ref", None))

        try:
            kg_id = self.graph.write_object(x)
        except Exception as exc:
            alert = self.alerts.append(oid, "graph_write", "none", repr(exc))
            return SyncOutcome(SyncStatus.FAILED, None, None, _fmt(alert))

        try:
            vec = self._vector_for(x)
        except Exception as exc:
            return self._compensate(kg_id, fresh, "embed", exc)

        collection, payload = self._placement(x)
        try:
            vec_id = self.index.insert(kg_id, collection, vec, x.scope, payload)
        except Exception as exc:
            return self._compensate(kg_id, fresh, "vector_insert", exc)
        if vec_id is None:
            return self._compensate(kg_id, fresh, "vector_insert", VectorWriteError("no vec_id returned"))

        try:
            self.graph.set_embedding_ref(kg_id, vec_id)
        except Exception as exc:
            alert = self.alerts.append(kg_id, "write_back", "preserved", f"{vec_id}: {exc!r}")
            return SyncOutcome(SyncStatus.FAILED, kg_id, vec_id, _fmt(alert))

        self.alerts.resolve(kg_id, "resynced")
        return SyncOutcome(SyncStatus.SUCCESS, kg_id, vec_id)

    def _compensate(self, kg_id: str, fresh: bool, phase: str, exc: BaseException) -> SyncOutcome:
        try:
            if fresh:
                self.graph.remove_object(kg_id)
                action = "hard_delete"
            else:
                self.graph.mark_stale(kg_id)
                action = "mark_stale"
        except Exception as comp_exc:
            action = "compensation_failed"
            exc = comp_exc
        alert = self.alerts.append(kg_id, phase, action, repr(exc))
        return SyncOutcome(SyncStatus.FAILED, kg_id, None, _fmt(alert))

    # -- chunks and hypernodes --------------------------------------------

    def sync_chunk(
        self,
        chunk: Chunk,
        mentioned_entity_ids: Iterable[str] = (),
        scope: Optional[IsolationScope] = None,
        title: str = "",
    ) -> SyncOutcome:
        """Ensure document node, chunk node, per-chunk HyperNode and evidence bridges."""
        scope = (scope or IsolationScope()).for_document(chunk.doc_id)
        doc_node = document_node_id(chunk.doc_id)
        if not self.graph.has(doc_node):
            self.graph.upsert_document(DocumentNode(doc_node, chunk.doc_id, title, scope))

        node = ChunkNode(chunk.chunk_id, chunk.doc_id, chunk.text, scope=scope)
        outcome = self.sync_object(node)
        if not outcome.ok and not self.graph.has(chunk.chunk_id):
            return outcome

        mentions = set(mentioned_entity_ids)
        if not mentions:
            return outcome

        hid = hyper_id_for(chunk.chunk_id)
        try:
            prev = self.graph.get_hypernode(hid)
            members = prev.member_ids | mentions
        except NotFound:
            members = mentions
        hyper = HyperNode(hid, members, {chunk.chunk_id}, scope=scope.run_level())
        h_out = self.sync_object(hyper)
        if not h_out.ok:
            return SyncOutcome(SyncStatus.FAILED, outcome.kg_id, outcome.vec_id, h_out.alert)
        return outcome

    def hypernode_centroid(self, h: HyperNode) -> np.ndarray:
        if not h.member_ids:
            raise EmptyMemberSet(h.hyper_id)
        vectors, weights = [], []
        for m in sorted(h.member_ids):
            ent = self.graph.get_entity(m)
            rec = self.index.get(ent.embedding_ref) if ent.embedding_ref else None
            if rec is None:
                raise MissingMemberVector(f"{h.hyper_id}: member {m} has no vector")
            vectors.append(rec.embedding)
            weights.append(ent.confidence)
        return weighted_centroid(vectors, weights)

    def resync_hypernodes_with(self, entity_id: str) -> None:
        for h in self.graph.hypernodes():
            if entity_id in h.member_ids:
                self.sync_object(h)

    # -- deletion ---------------------------------------------------------

    def delete_entity(self, entity_id: str, reason: str) -> dict:
        ent = self.graph.get_entity(entity_id)
        affected = [h for h in self.graph.hypernodes() if entity_id in h.member_ids]
        status = self.graph.hard_delete_entity(entity_id, reason)
        if ent.embedding_ref:
            self.index.delete(ent.embedding_ref)
        for h in affected:
            h = self.graph.get_hypernode(h.hyper_id)
            if h.member_ids:
                self.sync_object(h)
            else:
                self.remove_object(h.hyper_id)
        return status

    def remove_object(self, object_id: str) -> None:
        obj = self.graph.get_object(object_id)
        ref = getattr(obj, "embedding_ref", None)
        if ref:
            self.index.delete(ref)
        self.graph.remove_object(object_id)

    # -- audit ------------------------------------------------------------

    def consistency_check(self, scope: Optional[IsolationScope] = None) -> ConsistencyReport:
        report = ConsistencyReport()
        pending = set(self.alerts.pending())
        objects = {_object_id(o): o for o in self.graph.vectorized_objects(scope)}
        for oid, obj in sorted(objects.items()):
            if obj.embedding_ref is not None:
                if self.index.get(obj.embedding_ref) is None:
                    report.dangling_refs.append((oid, obj.embedding_ref))
            elif oid not in pending:
                report.unsynced.append(oid)
        for rec in self.index.records(scope):
            obj = objects.get(rec.object_id)
            if obj is None:
                if not self.graph.has(rec.object_id):
                    report.orphan_vectors.append((rec.vec_id, rec.object_id))
            elif obj.embedding_ref != rec.vec_id:
                report.unreferenced.append((rec.object_id, rec.vec_id))
        # a compensated fresh object no longer exists; its alert is history, not work
        indexed = {r.object_id for r in self.index.records(scope)}
        report.pending_alerts = sorted(p for p in pending if p in objects or p in indexed)
        return report


def _fmt(alert: Alert) -> str:
    return f"{alert.phase}:{alert.action}:{alert.object_id}"
