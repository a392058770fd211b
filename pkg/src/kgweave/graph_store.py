"""In-process property graph: entities, typed relations, HyperNodes,
document/chunk nodes and evidence bridge edges.

All reads and writes go through one re-entrant lock, so a reader never sees a
half-applied write.  Objects handed out by getters are copies; mutate through
the store's write methods only.
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
import threading
from collections import deque
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from kgweave.errors import DanglingEndpoint, NotFound, ScopeMismatch, UnknownSeed
from kgweave.jsonio import atomic_write, dumps_line

FORMAT_VERSION = 1


@dataclass(frozen=True)
class IsolationScope:
    """Partition key carried by every stored object.

    An empty ``document_id`` on the *query* side means "any document in the
    run"; an empty ``document_id`` on the *object* side means the object is
    run-level knowledge (entities, relations) rather than document-bound.
    """

    tenant_id: str = "default"
    run_id: str = "run-0"
    dataset: str = "default"
    document_id: str = ""

    def same_run(self, other: "IsolationScope") -> bool:
        return (self.tenant_id, self.run_id, self.dataset) == (
            other.tenant_id,
            other.run_id,
            other.dataset,
        )

    def admits(self, obj_scope: "IsolationScope") -> bool:
        if not self.same_run(obj_scope):
            return False
        return not self.document_id or obj_scope.document_id in ("", self.document_id)

    def for_document(self, doc_id: str) -> "IsolationScope":
        return IsolationScope(self.tenant_id, self.run_id, self.dataset, doc_id)

    def run_level(self) -> "IsolationScope":
        return IsolationScope(self.tenant_id, self.run_id, self.dataset, "")

    def key(self) -> str:
        return f"{self.tenant_id}|{self.run_id}|{self.dataset}|{self.document_id}"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "IsolationScope":
        return cls(**d)


class EdgeType(str, Enum):
    HAS_EVIDENCE = "HAS_EVIDENCE"  # hypernode -> chunk
    MENTIONS_ENTITY = "MENTIONS_ENTITY"  # chunk -> entity
    EVIDENCED_BY = "EVIDENCED_BY"  # entity -> chunk


class SearchType(str, Enum):
    ENTITY = "ENTITY"
    RELATION = "RELATION"
    FUZZY = "FUZZY"


@dataclass
class Entity:
    entity_id: str
    name: str
    entity_type: str = "Concept"
    description: str = ""
    aliases: set[str] = field(default_factory=set)
    properties: dict[str, Any] = field(default_factory=dict)
    confidence: float = 1.0
    embedding_ref: Optional[str] = None
    deleted: bool = False
    scope: IsolationScope = field(default_factory=IsolationScope)
    stale: bool = False

    @property
    def text(self) -> str:
        parts = [self.name]
        if self.aliases:
            parts.append("(" + ", ".join(sorted(self.aliases)) + ")")
        if self.description:
            parts.append(self.description)
        return " ".join(parts)


@dataclass
class Relation:
    relation_id: str
    head_id: str
    tail_id: str
    relation_type: str
    properties: dict[str, Any] = field(default_factory=dict)
    confidence: float = 1.0
    evidence_refs: list[str] = field(default_factory=list)
    deleted: bool = False
    delete_reason: Optional[str] = None
    scope: IsolationScope = field(default_factory=IsolationScope)


@dataclass
class HyperNode:
    hyper_id: str
    member_ids: set[str] = field(default_factory=set)
    chunk_refs: set[str] = field(default_factory=set)
    embedding_ref: Optional[str] = None
    scope: IsolationScope = field(default_factory=IsolationScope)
    stale: bool = False


@dataclass
class DocumentNode:
    node_id: str
    doc_id: str
    title: str = ""
    scope: IsolationScope = field(default_factory=IsolationScope)


@dataclass
class ChunkNode:
    chunk_id: str
    doc_id: str
    text: str
    embedding_ref: Optional[str] = None
    scope: IsolationScope = field(default_factory=IsolationScope)
    stale: bool = False


GraphObject = Union[Entity, Relation, HyperNode, DocumentNode, ChunkNode]


def _digest(*parts: str) -> str:
    return hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=6).hexdigest()


def normalize_name(name: str) -> str:
    return " ".join(re.sub(r"[^\w\s]", " ", name.casefold()).split())


def entity_id_for(name: str, scope: IsolationScope) -> str:
    s = scope.run_level()
    return "ent-" + _digest(s.key(), normalize_name(name) or name)


def relation_id_for(head_id: str, relation_type: str, tail_id: str, scope: IsolationScope) -> str:
    return "rel-" + _digest(scope.run_level().key(), head_id, relation_type, tail_id)


def hyper_id_for(chunk_id: str) -> str:
    return f"hyp:{chunk_id}"


def document_node_id(doc_id: str) -> str:
    return f"doc::{doc_id}"


class GraphStore:
    """Single-writer, many-reader property graph."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._entities: dict[str, Entity] = {}
        self._relations: dict[str, Relation] = {}
        self._hypers: dict[str, HyperNode] = {}
        self._docs: dict[str, DocumentNode] = {}
        self._chunks: dict[str, ChunkNode] = {}
        self._edges: set[tuple[str, str, str]] = set()

    # -- writes -----------------------------------------------------------

    def upsert_entity(self, e: Entity) -> str:
        if not e.name or not e.name.strip():
            raise ValueError("entity name must be non-empty")
        if not 0.0 <= e.confidence <= 1.0:
            raise ValueError(f"confidence {e.confidence} outside [0, 1]")
        with self._lock:
            self._entities[e.entity_id] = copy.deepcopy(e)
        return e.entity_id

    def upsert_relation(self, r: Relation) -> str:
        with self._lock:
            for end in (r.head_id, r.tail_id):
                ent = self._entities.get(end) if end else None
                if ent is None:
                    raise DanglingEndpoint(f"relation {r.relation_id}: unknown endpoint {end!r}")
                if not ent.scope.same_run(r.scope):
                    raise ScopeMismatch(f"relation {r.relation_id} and entity {end} differ in scope")
            self._relations[r.relation_id] = copy.deepcopy(r)
        return r.relation_id

    def upsert_hypernode(self, h: HyperNode) -> str:
        with self._lock:
            for m in h.member_ids:
                ent = self._entities.get(m)
                if ent is None:
                    raise DanglingEndpoint(f"hypernode {h.hyper_id}: unknown member {m!r}")
                if not ent.scope.same_run(h.scope):
                    raise ScopeMismatch(f"hypernode {h.hyper_id} and member {m} differ in scope")
            for c in h.chunk_refs:
                if c not in self._chunks:
                    raise DanglingEndpoint(f"hypernode {h.hyper_id}: unknown chunk {c!r}")
            old = self._hypers.get(h.hyper_id)
            if old is not None:
                for c in old.chunk_refs - h.chunk_refs:
                    self._edges.discard((h.hyper_id, EdgeType.HAS_EVIDENCE.value, c))
            self._hypers[h.hyper_id] = copy.deepcopy(h)
            for c in h.chunk_refs:
                self._edges.add((h.hyper_id, EdgeType.HAS_EVIDENCE.value, c))
                for m in h.member_ids:
                    self._link(c, m)
        return h.hyper_id

    def upsert_document(self, d: DocumentNode) -> str:
        with self._lock:
            self._docs[d.node_id] = copy.deepcopy(d)
        return d.node_id

    def upsert_chunk(self, c: ChunkNode) -> str:
        with self._lock:
            prev = self._chunks.get(c.chunk_id)
            c = copy.deepcopy(c)
            if prev is not None and c.embedding_ref is None:
                c.embedding_ref = prev.embedding_ref
            self._chunks[c.chunk_id] = c
        return c.chunk_id

    def _link(self, chunk_id: str, entity_id: str) -> None:
        self._edges.add((chunk_id, EdgeType.MENTIONS_ENTITY.value, entity_id))
        self._edges.add((entity_id, EdgeType.EVIDENCED_BY.value, chunk_id))

    def link_evidence(self, chunk_id: str, entity_id: str) -> None:
        with self._lock:
            if chunk_id not in self._chunks:
                raise DanglingEndpoint(f"unknown chunk {chunk_id!r}")
            if entity_id not in self._entities:
                raise DanglingEndpoint(f"unknown entity {entity_id!r}")
            self._link(chunk_id, entity_id)

    def write_object(self, obj: GraphObject) -> str:
        if isinstance(obj, Entity):
            return self.upsert_entity(obj)
        if isinstance(obj, Relation):
            return self.upsert_relation(obj)
        if isinstance(obj, HyperNode):
            return self.upsert_hypernode(obj)
        if isinstance(obj, ChunkNode):
            return self.upsert_chunk(obj)
        if isinstance(obj, DocumentNode):
            return self.upsert_document(obj)
        raise TypeError(f"not a graph object: {type(obj).__name__}")

    def set_embedding_ref(self, object_id: str, vec_id: Optional[str]) -> None:
        with self._lock:
            obj = self._vectorized(object_id)
            obj.embedding_ref = vec_id
            obj.stale = False

    def mark_stale(self, object_id: str, stale: bool = True) -> None:
        with self._lock:
            self._vectorized(object_id).stale = stale

    def _vectorized(self, object_id: str) -> Union[Entity, HyperNode, ChunkNode]:
        for table in (self._entities, self._hypers, self._chunks):
            if object_id in table:
                return table[object_id]
        raise NotFound(object_id)

    def update_relation(self, relation_id: str, **changes: Any) -> None:
        with self._lock:
            rel = self._relations.get(relation_id)
            if rel is None:
                raise NotFound(relation_id)
            for k, v in changes.items():
                setattr(rel, k, copy.deepcopy(v))

    def remove_object(self, object_id: str) -> None:
        """Physically remove a node (compensation path); entities cascade like hard delete."""
        with self._lock:
            if object_id in self._entities:
                self.hard_delete_entity(object_id, "compensation")
            elif object_id in self._chunks:
                del self._chunks[object_id]
                self._drop_edges(object_id)
                for h in self._hypers.values():
                    h.chunk_refs.discard(object_id)
            elif object_id in self._hypers:
                del self._hypers[object_id]
                self._drop_edges(object_id)
            elif object_id in self._docs:
                del self._docs[object_id]
            elif object_id in self._relations:
                del self._relations[object_id]
            else:
                raise NotFound(object_id)

    def _drop_edges(self, node_id: str) -> None:
        self._edges = {e for e in self._edges if e[0] != node_id and e[2] != node_id}

    def soft_delete_relation(self, relation_id: str, reason: str) -> str:
        with self._lock:
            rel = self._relations.get(relation_id)
            if rel is None:
                raise NotFound(relation_id)
            if rel.deleted:
                return "already_deleted"
            rel.deleted = True
            rel.delete_reason = reason
            return "deleted"

    def hard_delete_entity(self, entity_id: str, reason: str) -> dict:
        with self._lock:
            if entity_id not in self._entities:
                raise NotFound(entity_id)
            cascaded = []
            for rel in self._relations.values():
                if not rel.deleted and entity_id in (rel.head_id, rel.tail_id):
                    rel.deleted = True
                    rel.delete_reason = f"cascade: entity {entity_id} deleted ({reason})"
                    cascaded.append(rel.relation_id)
            del self._entities[entity_id]
            self._drop_edges(entity_id)
            for h in self._hypers.values():
                h.member_ids.discard(entity_id)
            return {"status": "deleted", "entity_id": entity_id, "cascaded": sorted(cascaded)}

    def migrate_evidence(self, source_id: str, target_id: str) -> None:
        """Move evidence edges and hypernode memberships from one entity to another."""
        with self._lock:
            for src, et, dst in list(self._edges):
                if et == EdgeType.EVIDENCED_BY.value and src == source_id:
                    self._link(dst, target_id)
                elif et == EdgeType.MENTIONS_ENTITY.value and dst == source_id:
                    self._link(src, target_id)
            for h in self._hypers.values():
                if source_id in h.member_ids:
                    h.member_ids.discard(source_id)
                    h.member_ids.add(target_id)

    # -- reads ------------------------------------------------------------

    def get_entity(self, entity_id: str) -> Entity:
        with self._lock:
            if entity_id not in self._entities:
                raise NotFound(entity_id)
            return copy.deepcopy(self._entities[entity_id])

    def get_relation(self, relation_id: str) -> Relation:
        """Direct fetch; soft-deleted relations are returned with ``deleted=True``."""
        with self._lock:
            if relation_id not in self._relations:
                raise NotFound(relation_id)
            return copy.deepcopy(self._relations[relation_id])

    def get_hypernode(self, hyper_id: str) -> HyperNode:
        with self._lock:
            if hyper_id not in self._hypers:
                raise NotFound(hyper_id)
            return copy.deepcopy(self._hypers[hyper_id])

    def get_chunk(self, chunk_id: str) -> ChunkNode:
        with self._lock:
            if chunk_id not in self._chunks:
                raise NotFound(chunk_id)
            return copy.deepcopy(self._chunks[chunk_id])

    def get_object(self, object_id: str) -> GraphObject:
        with self._lock:
            for table in (self._entities, self._relations, self._hypers, self._chunks, self._docs):
                if object_id in table:
                    return copy.deepcopy(table[object_id])
        raise NotFound(object_id)

    def has(self, object_id: str) -> bool:
        with self._lock:
            return any(
                object_id in t
                for t in (self._entities, self._relations, self._hypers, self._chunks, self._docs)
            )

    def entities(self, scope: Optional[IsolationScope] = None) -> list[Entity]:
        with self._lock:
            return [
                copy.deepcopy(e)
                for _, e in sorted(self._entities.items())
                if scope is None or scope.admits(e.scope)
            ]

    def relations(
        self, scope: Optional[IsolationScope] = None, include_deleted: bool = False
    ) -> list[Relation]:
        with self._lock:
            return [
                copy.deepcopy(r)
                for _, r in sorted(self._relations.items())
                if (include_deleted or not r.deleted) and (scope is None or scope.admits(r.scope))
            ]

    def hypernodes(self, scope: Optional[IsolationScope] = None) -> list[HyperNode]:
        with self._lock:
            return [
                copy.deepcopy(h)
                for _, h in sorted(self._hypers.items())
                if scope is None or scope.admits(h.scope)
            ]

    def chunk_nodes(self, scope: Optional[IsolationScope] = None) -> list[ChunkNode]:
        with self._lock:
            return [
                copy.deepcopy(c)
                for _, c in sorted(self._chunks.items())
                if scope is None or scope.admits(c.scope)
            ]

    def vectorized_objects(self, scope: Optional[IsolationScope] = None) -> list:
        return self.entities(scope) + self.hypernodes(scope) + self.chunk_nodes(scope)

    def edges(
        self,
        edge_type: Optional[EdgeType] = None,
        src: Optional[str] = None,
        dst: Optional[str] = None,
    ) -> list[tuple[str, str, str]]:
        et = EdgeType(edge_type).value if edge_type is not None else None
        with self._lock:
            return sorted(
                e
                for e in self._edges
                if (et is None or e[1] == et)
                and (src is None or e[0] == src)
                and (dst is None or e[2] == dst)
            )

    def evidence_chunks(self, entity_id: str) -> list[str]:
        return [d for _, _, d in self.edges(EdgeType.EVIDENCED_BY, src=entity_id)]

    def mentioned_entities(self, chunk_id: str) -> list[str]:
        return [d for _, _, d in self.edges(EdgeType.MENTIONS_ENTITY, src=chunk_id)]

    def hypernodes_for_chunk(self, chunk_id: str) -> list[str]:
        return [s for s, _, _ in self.edges(EdgeType.HAS_EVIDENCE, dst=chunk_id)]

    def counts(self, scope: Optional[IsolationScope] = None) -> dict[str, int]:
        return {
            "entities": len(self.entities(scope)),
            "relations": len(self.relations(scope)),
            "hypernodes": len(self.hypernodes(scope)),
            "chunks": len(self.chunk_nodes(scope)),
        }

    def is_empty(self, scope: IsolationScope) -> bool:
        with self._lock:
            tables: Iterable = (
                self._entities.values(),
                self._relations.values(),
                self._hypers.values(),
                self._chunks.values(),
                self._docs.values(),
            )
            return not any(scope.admits(o.scope) for t in tables for o in t)

    # -- lookup -----------------------------------------------------------

    def lookup(self, name: str, scope: Optional[IsolationScope] = None) -> list[Entity]:
        """Exact, case-insensitive match on name or alias."""
        key = name.strip().casefold()
        with self._lock:
            hits = [
                e
                for e in self._entities.values()
                if (scope is None or scope.admits(e.scope))
                and (e.name.casefold() == key or key in {a.casefold() for a in e.aliases})
            ]
            return [copy.deepcopy(e) for e in _by_confidence(hits)]

    def find_relation(
        self, head_id: str, relation_type: str, tail_id: str
    ) -> Optional[Relation]:
        with self._lock:
            for _, r in sorted(self._relations.items()):
                if (
                    not r.deleted
                    and r.head_id == head_id
                    and r.tail_id == tail_id
                    and r.relation_type == relation_type
                ):
                    return copy.deepcopy(r)
        return None

    def incident_relations(self, entity_id: str) -> list[Relation]:
        return [r for r in self.relations() if entity_id in (r.head_id, r.tail_id)]

    def find(
        self,
        query: str,
        search_type: Union[SearchType, str] = SearchType.ENTITY,
        limit: int = 10,
        scope: Optional[IsolationScope] = None,
    ) -> list[Union[Entity, Relation]]:
        """ENTITY: exact name/alias; FUZZY: normalized containment or word overlap;
        RELATION: relations whose type or endpoint name matches.

        Ordered by confidence descending, then id ascending; soft-deleted
        objects never appear.
        """
        if limit <= 0:
            raise ValueError("limit must be positive")
        st = search_type if isinstance(search_type, SearchType) else SearchType(str(search_type).upper())
        if st is SearchType.ENTITY:
            return self.lookup(query, scope)[:limit]

        q = normalize_name(query)
        if not q:
            return []
        with self._lock:
            if st is SearchType.FUZZY:
                q_words = set(q.split())
                hits = []
                for e in self._entities.values():
                    if scope is not None and not scope.admits(e.scope):
                        continue
                    for cand in (e.name, *e.aliases):
                        c = normalize_name(cand)
                        if c and (q in c or set(c.split()) <= q_words):
                            hits.append(e)
                            break
                return [copy.deepcopy(e) for e in _by_confidence(hits)[:limit]]

            rel_key = re.sub(r"\W+", "_", query.strip()).strip("_").upper()
            name_ids = {e.entity_id for e in self.lookup(query, scope)}
            rels = [
                r
                for r in self._relations.values()
                if not r.deleted
                and (scope is None or scope.admits(r.scope))
                and (r.relation_type == rel_key or r.head_id in name_ids or r.tail_id in name_ids)
            ]
            rels.sort(key=lambda r: (-r.confidence, r.relation_id))
            return [copy.deepcopy(r) for r in rels[:limit]]

    # -- traversal --------------------------------------------------------

    def _adjacency(self, scope: Optional[IsolationScope]) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {}
        for r in self._relations.values():
            if r.deleted or (scope is not None and not scope.admits(r.scope)):
                continue
            if r.head_id not in self._entities or r.tail_id not in self._entities:
                continue
            adj.setdefault(r.head_id, set()).add(r.tail_id)
            adj.setdefault(r.tail_id, set()).add(r.head_id)
        return adj

    def bfs_distances(
        self,
        seed_ids: Iterable[str],
        h: int,
        scope: Optional[IsolationScope] = None,
    ) -> dict[str, int]:
        """Hop distance (edge direction ignored) for every entity within ``h`` hops,
        seeds included at distance 0."""
        if h < 1:
            raise ValueError("hop count must be >= 1")
        seeds = sorted(set(seed_ids))
        with self._lock:
            for s in seeds:
                ent = self._entities.get(s)
                if ent is None or (scope is not None and not scope.admits(ent.scope)):
                    raise UnknownSeed(s)
            adj = self._adjacency(scope)
        dist = {s: 0 for s in seeds}
        queue = deque(seeds)
        while queue:
            cur = queue.popleft()
            if dist[cur] >= h:
                continue
            for nb in sorted(adj.get(cur, ())):
                if nb not in dist:
                    dist[nb] = dist[cur] + 1
                    queue.append(nb)
        return dist

    def neighbors_bfs(
        self,
        seed_ids: Iterable[str],
        h: int,
        scope: Optional[IsolationScope] = None,
    ) -> set[str]:
        seeds = set(seed_ids)
        return {n for n, d in self.bfs_distances(seeds, h, scope).items() if d > 0}

    # -- snapshot ---------------------------------------------------------

    def snapshot(self) -> list[dict]:
        """Every node and edge as plain records, ordered by kind then id."""
        with self._lock:
            recs: list[dict] = []
            for kind, table in (
                ("document", self._docs),
                ("chunk", self._chunks),
                ("entity", self._entities),
                ("relation", self._relations),
                ("hypernode", self._hypers),
            ):
                for _, obj in sorted(table.items()):
                    recs.append({"kind": kind, **_plain(asdict(obj))})
            for s, t, d in sorted(self._edges):
                recs.append({"kind": "edge", "src": s, "type": t, "dst": d})
            return recs

    def dump(self, path: str | Path) -> None:
        lines = [dumps_line({"kind": "header", "format_version": FORMAT_VERSION})]
        lines += [dumps_line(r) for r in self.snapshot()]
        atomic_write(path, "\n".join(lines) + "\n")

    def dumps(self) -> str:
        return "\n".join(dumps_line(r) for r in self.snapshot())

    @classmethod
    def load(cls, path: str | Path) -> "GraphStore":
        g = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("kind")
            if kind == "header":
                continue
            if kind == "edge":
                g._edges.add((rec["src"], rec["type"], rec["dst"]))
                continue
            rec["scope"] = IsolationScope.from_dict(rec["scope"])
            if kind == "entity":
                rec["aliases"] = set(rec["aliases"])
                g._entities[rec["entity_id"]] = Entity(**rec)
            elif kind == "relation":
                g._relations[rec["relation_id"]] = Relation(**rec)
            elif kind == "hypernode":
                rec["member_ids"] = set(rec["member_ids"])
                rec["chunk_refs"] = set(rec["chunk_refs"])
                g._hypers[rec["hyper_id"]] = HyperNode(**rec)
            elif kind == "chunk":
                g._chunks[rec["chunk_id"]] = ChunkNode(**rec)
            elif kind == "document":
                g._docs[rec["node_id"]] = DocumentNode(**rec)
        return g


def _by_confidence(items: list) -> list:
    def key(o):
        oid = getattr(o, "entity_id", None) or getattr(o, "relation_id")
        return (-o.confidence, oid)

    return sorted(items, key=key)


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        return sorted(_plain(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value
