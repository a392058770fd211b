"""Tool implementations and the dispatcher that validates and routes calls.

Write tools record provenance as a side effect; read tools never touch the
graph.  Every tool receives the shared ``Workspace`` (stores, ledger, schema)
and the agent-facing ``ToolState`` (queues, counters, reading position).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Optional

import jsonschema

from kgweave.clock import Clock, utc_now
from kgweave.corpus import Chunk
from kgweave.errors import (
    AmbiguousEndpoint,
    EmptyIndex,
    EvidenceNotAnchored,
    KGWeaveError,
    NotFound,
    SchemaViolation,
    SelfMerge,
    SyncFailed,
    UnknownChunk,
    UnknownTool,
    GateRejected,
)
from kgweave.graph_store import (
    Entity,
    GraphStore,
    IsolationScope,
    Relation,
    SearchType,
    entity_id_for,
    normalize_name,
    relation_id_for,
)
from kgweave.retrieval import Mode, RetrievalRequest, Retriever
from kgweave.schema import RelationState, SchemaRegistry, generic_profile
from kgweave.sync import AlertLog, SyncCoordinator
from kgweave.toolkit.gate import QualityGate
from kgweave.toolkit.provenance import Operation, ProvenanceLedger
from kgweave.toolkit.schemas import BATCH_SUBSCHEMAS, TOOL_SCHEMAS
from kgweave.vector_index import Collection, EmbeddingProvider, HashingEmbedder, VectorIndex

log = logging.getLogger(__name__)

DEFAULT_CERTAINTY = 0.8
TODO_TYPES = ("disambiguate", "verify", "attribute_completion", "follow_up")


@dataclass
class TodoItem:
    todo_id: str
    task: str
    todo_type: str
    related_entity: str = ""
    priority: int = 3
    payload: dict = field(default_factory=dict)
    source_chunk: Optional[str] = None
    attempts: int = 0


@dataclass
class ReviewItem:
    review_id: str
    subject: str
    reason: str
    priority: int = 3
    source_chunk: Optional[str] = None


def by_priority(items: list) -> list:
    """Highest priority first, then creation order."""
    return sorted(items, key=lambda it: (-it.priority, _seq(it)))


def _seq(item) -> int:
    ident = getattr(item, "todo_id", None) or getattr(item, "review_id")
    return int(ident.rsplit("-", 1)[1])


def _new_counters() -> dict[str, int]:
    return {"entities": 0, "relations": 0, "merges": 0, "tool_calls": 0}


@dataclass
class ToolState:
    """The part of agent state that tools read and write."""

    doc_id: str = ""
    paragraph_index: int = 0
    chunk_count: int = 0
    current_chunk: Optional[str] = None
    todo_queue: list[TodoItem] = field(default_factory=list)
    review_queue: list[ReviewItem] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=_new_counters)
    item_seq: int = 0

    def next_id(self, prefix: str) -> str:
        self.item_seq += 1
        return f"{prefix}-{self.item_seq:05d}"


@dataclass(frozen=True)
class ToolCall:
    tool_name: str
    args: dict
    call_id: str = ""

    def to_dict(self) -> dict:
        return {"tool_name": self.tool_name, "args": self.args, "call_id": self.call_id}


@dataclass(frozen=True)
class Observation:
    call_id: str
    tool_name: str
    ok: bool
    result: Any = None
    error: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "call_id": self.call_id,
            "tool_name": self.tool_name,
            "ok": self.ok,
            "result": self.result,
            "error": self.error,
        }

    def to_message(self) -> dict:
        """Chat-style tool message for backfilling into the dialogue."""
        body = self.result if self.ok else {"error": self.error}
        return {
            "role": "tool",
            "tool_call_id": self.call_id,
            "name": self.tool_name,
            "content": json.dumps(body, sort_keys=True, ensure_ascii=False, default=str),
        }


def error_payload(tool: str, exc: BaseException) -> dict:
    code = exc.code if isinstance(exc, KGWeaveError) else f"python.{type(exc).__name__}"
    payload = {"tool": tool, "code": code, "message": str(exc)}
    if isinstance(exc, GateRejected):
        payload["rule"] = exc.rule
        payload["hint"] = "keep the observation, create a todo, or abandon the candidate"
    return payload


@dataclass
class Workspace:
    """Stores and services shared by every tool call in one run."""

    graph: GraphStore
    index: VectorIndex
    embedder: EmbeddingProvider
    schema: SchemaRegistry
    scope: IsolationScope = field(default_factory=IsolationScope)
    ledger: ProvenanceLedger = field(default_factory=ProvenanceLedger)
    alerts: AlertLog = field(default_factory=AlertLog)
    gate: QualityGate = field(default_factory=QualityGate)
    chunks: dict[str, Chunk] = field(default_factory=dict)
    titles: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.scope = self.scope.run_level()
        self.sync = SyncCoordinator(self.graph, self.index, self.embedder, self.alerts)
        self.retriever = Retriever(self.graph, self.index, self.embedder, self.alerts)

    @classmethod
    def create(
        cls,
        scope: Optional[IsolationScope] = None,
        dimension: int = 64,
        embedder: Optional[EmbeddingProvider] = None,
        clock: Clock = utc_now,
        schema: Optional[SchemaRegistry] = None,
    ) -> "Workspace":
        emb = embedder or HashingEmbedder(dimension)
        return cls(
            graph=GraphStore(),
            index=VectorIndex(emb.dimension),
            embedder=emb,
            schema=schema or SchemaRegistry(generic_profile(), emb),
            scope=scope or IsolationScope(),
            ledger=ProvenanceLedger(clock),
            alerts=AlertLog(clock),
        )

    def add_chunks(self, chunks: list[Chunk], title: str = "") -> None:
        for c in chunks:
            self.chunks[c.chunk_id] = c
            if title:
                self.titles[c.doc_id] = title

    def chunk(self, chunk_id: str) -> Chunk:
        try:
            return self.chunks[chunk_id]
        except KeyError:
            raise UnknownChunk(chunk_id) from None

    def doc_chunks(self, doc_id: str) -> list[Chunk]:
        return sorted((c for c in self.chunks.values() if c.doc_id == doc_id), key=lambda c: c.index)


def _entity_view(e: Entity) -> dict:
    return {
        "entity_id": e.entity_id,
        "name": e.name,
        "entity_type": e.entity_type,
        "aliases": sorted(e.aliases),
        "description": e.description,
        "confidence": e.confidence,
    }


def _relation_view(g: GraphStore, r: Relation) -> dict:
    def name(eid: str) -> str:
        try:
            return g.get_entity(eid).name
        except NotFound:
            return eid

    return {
        "relation_id": r.relation_id,
        "head": name(r.head_id),
        "relation_type": r.relation_type,
        "tail": name(r.tail_id),
        "confidence": r.confidence,
    }


def _validate(schema: dict, args: dict, tool: str) -> None:
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(args), key=lambda e: list(e.path))
    if errors:
        where = "/".join(str(p) for p in errors[0].path) or "<root>"
        raise SchemaViolation(f"{tool}: {where}: {errors[0].message}")


class Toolkit:
    def __init__(self, ws: Workspace):
        self.ws = ws
        self._tools: dict[str, Callable[[dict, ToolState], Any]] = {
            name: getattr(self, name) for name in TOOL_SCHEMAS
        }

    @property
    def names(self) -> list[str]:
        return sorted(self._tools)

    def dispatch(self, call: ToolCall, state: ToolState) -> Observation:
        """Validate and run one call; failures come back as error observations."""
        state.counters["tool_calls"] += 1
        try:
            result = self.invoke(call.tool_name, call.args, state)
        except (KGWeaveError, ValueError, KeyError) as exc:
            log.debug("tool %s failed: %s", call.tool_name, exc)
            return Observation(call.call_id, call.tool_name, False, None, error_payload(call.tool_name, exc))
        return Observation(call.call_id, call.tool_name, True, result)

    def invoke(self, name: str, args: dict, state: ToolState) -> Any:
        """Validate and run one call, raising on failure."""
        if name not in self._tools:
            raise UnknownTool(name)
        if not isinstance(args, dict):
            raise SchemaViolation(f"{name}: arguments must be an object")
        _validate(TOOL_SCHEMAS[name], args, name)
        return self._tools[name](args, state)

    # -- helpers ----------------------------------------------------------

    def _resolve(self, name: str) -> Entity:
        hits = self.ws.graph.lookup(name, self.ws.scope)
        if not hits:
            raise NotFound(f"no entity named {name!r}")
        if len(hits) > 1:
            # an exact name beats alias matches
            exact = [e for e in hits if normalize_name(e.name) == normalize_name(name)]
            if len(exact) == 1:
                return exact[0]
            ids = ", ".join(e.entity_id for e in hits)
            raise AmbiguousEndpoint(f"{name!r} matches several entities ({ids}); mark for review")
        return hits[0]

    def _live_relation(self, relation_id: str) -> Relation:
        rel = self.ws.graph.get_relation(relation_id)
        if rel.deleted:
            raise NotFound(f"relation {relation_id} is deleted")
        return rel

    def _anchored(self, chunk_id: str, evidence: str) -> Chunk:
        chunk = self.ws.chunk(chunk_id)
        if evidence not in chunk.text:
            raise EvidenceNotAnchored(f"evidence is not a verbatim substring of {chunk_id}")
        return chunk

    def _anchor_for(self, args: dict, ent: Optional[Entity], *fallback_ids: str) -> tuple[Optional[str], str]:
        """Pick (chunk_id, snippet): explicit evidence, a name mention in the
        given chunk, or the latest anchored record of ``fallback_ids``."""
        if "source_chunk" in args:
            chunk = self.ws.chunk(args["source_chunk"])
            if "evidence" in args:
                self._anchored(chunk.chunk_id, args["evidence"])
                return chunk.chunk_id, args["evidence"]
            if ent is not None:
                low = chunk.text.casefold()
                for cand in sorted({ent.name, *ent.aliases}, key=lambda s: (-len(s), s)):
                    at = low.find(cand.casefold())
                    if at >= 0 and chunk.text[at:at + len(cand)].casefold() == cand.casefold():
                        return chunk.chunk_id, chunk.text[at:at + len(cand)]
        rec = self.ws.ledger.latest_anchor(*fallback_ids)
        if rec is not None:
            return rec.source_chunk_id, rec.evidence_snippet
        if "source_chunk" in args:
            raise EvidenceNotAnchored(f"no verbatim evidence found in {args['source_chunk']}")
        return None, ""

    def _record(self, object_id, op, chunk_id, snippet, confidence, tool, related=(), detail="") -> None:
        doc_id = self.ws.chunks[chunk_id].doc_id if chunk_id in self.ws.chunks else None
        self.ws.ledger.append(object_id, op, chunk_id, snippet, confidence, doc_id, related, tool, detail)

    def _link_chunk(self, chunk: Chunk, entity_ids: list[str]) -> Optional[str]:
        out = self.ws.sync.sync_chunk(chunk, entity_ids, self.ws.scope, self.ws.titles.get(chunk.doc_id, ""))
        return None if out.ok else out.alert

    # -- read tools -------------------------------------------------------

    def read_paragraph(self, args: dict, state: ToolState) -> dict:
        chunks = self.ws.doc_chunks(args["doc_id"])
        idx = args["paragraph_idx"]
        if idx >= len(chunks):
            raise UnknownChunk(f"{args['doc_id']} has {len(chunks)} paragraphs, asked for {idx}")
        c = chunks[idx]
        return {
            "chunk_id": c.chunk_id,
            "text": c.text,
            "paragraph_idx": idx,
            "total": len(chunks),
            "status": c.state.value,
            "section": list(c.section),
        }

    def browse_context(self, args: dict, state: ToolState) -> dict:
        mode = args["mode"]
        radius = args.get("radius", 1)
        g = self.ws.graph
        if mode == "kg_neighbors":
            query = args.get("query", "")
            seeds = {e.entity_id for e in g.find(query, SearchType.FUZZY, 10, self.ws.scope)} if query else set()
            if not seeds:
                return {"mode": mode, "snippets": []}
            dist = g.bfs_distances(seeds, radius, self.ws.scope)
            snippets = []
            for eid, hop in sorted(dist.items(), key=lambda kv: (kv[1], kv[0])):
                e = g.get_entity(eid)
                snippets.append({**_entity_view(e), "hop": hop})
            return {"mode": mode, "snippets": snippets}

        chunk_id = args.get("chunk_id") or state.current_chunk
        if chunk_id is None:
            raise SchemaViolation(f"browse_context: mode {mode} needs chunk_id")
        here = self.ws.chunk(chunk_id)
        doc = self.ws.doc_chunks(here.doc_id)
        if mode == "local":
            lo, hi = max(0, here.index - radius), here.index + radius
            return {
                "mode": mode,
                "snippets": [
                    {"chunk_id": c.chunk_id, "text": c.text}
                    for c in doc
                    if lo <= c.index <= hi and c.chunk_id != chunk_id
                ],
            }
        return {
            "mode": mode,
            "doc_id": here.doc_id,
            "title": self.ws.titles.get(here.doc_id, ""),
            "snippets": [
                {
                    "chunk_id": c.chunk_id,
                    "section": list(c.section),
                    "struct_label": c.struct_label.value,
                    "preview": c.text[:80],
                }
                for c in doc
            ],
        }

    def search_kg(self, args: dict, state: ToolState) -> dict:
        st = SearchType(args.get("search_type", "fuzzy").upper())
        hits = self.ws.graph.find(args["query"], st, args.get("limit", 10), self.ws.scope)
        if st is SearchType.RELATION:
            return {"search_type": st.value, "matches": [_relation_view(self.ws.graph, r) for r in hits]}
        return {"search_type": st.value, "matches": [_entity_view(e) for e in hits]}

    def explore_fusion(self, args: dict, state: ToolState) -> dict:
        query = args["query"]
        top_k = args.get("top_k", 5)
        mode = args.get("mode", "parallel")
        ws = self.ws
        qv = ws.embedder.embed(query)
        entities = []
        if qv.any():
            for hit in ws.index.search(qv, top_k, ws.scope, Collection.ENTITY, where={"node_type": "ENTITY"}):
                if ws.graph.has(hit.object_id):
                    entities.append({**_entity_view(ws.graph.get_entity(hit.object_id)), "score": hit.score})
        try:
            rmode = Mode.KG if mode == "graph_first" else Mode.FUSION
            res = ws.retriever.retrieve(RetrievalRequest(query, rmode, top_k, max(100, top_k), scope=ws.scope))
            cands = list(res.candidates)
            if rmode is Mode.KG and len(cands) < top_k:
                vec = ws.retriever.retrieve(RetrievalRequest(query, Mode.VECTOR, top_k, max(100, top_k), scope=ws.scope))
                have = {c.object_id for c in cands}
                cands += [c for c in vec.candidates if c.object_id not in have][: top_k - len(cands)]
            fallback = res.fallback
        except EmptyIndex:
            cands, fallback = [], False
        chunks = [{**c.to_dict(), "preview": ws.chunks[c.object_id].text[:120] if c.object_id in ws.chunks else ""}
                  for c in cands]
        return {"mode": mode, "entities": entities, "chunks": chunks, "fallback": fallback}

    # -- create -----------------------------------------------------------

    def create_entity(self, args: dict, state: ToolState, tool: str = "create_entity") -> dict:
        ws = self.ws
        name = args["name"].strip()
        verdict = ws.gate(args["name"])
        if not verdict:
            raise GateRejected(verdict.rule, args["name"])
        chunk = self._anchored(args["source_chunk"], args["evidence"])
        certainty = float(args.get("certainty", DEFAULT_CERTAINTY))

        existing = None
        for cand in (name, *args.get("aliases", ())):
            hits = ws.graph.lookup(cand, ws.scope)
            if hits:
                existing = hits[0]
                break
        eid = entity_id_for(name, ws.scope)
        if existing is None and ws.graph.has(eid):
            existing = ws.graph.get_entity(eid)

        if existing is not None:
            eid = existing.entity_id
            status = "reused"
        else:
            ent = Entity(
                entity_id=eid,
                name=name,
                entity_type=args["entity_type"],
                description=args.get("description", ""),
                aliases={a for a in args.get("aliases", ()) if a.casefold() != name.casefold()},
                properties=dict(args.get("properties", {})),
                confidence=certainty,
                scope=ws.scope,
            )
            out = ws.sync.sync_object(ent)
            if not out.ok:
                raise SyncFailed(f"entity {name!r} not stored: {out.alert}")
            state.counters["entities"] += 1
            status = "created"
        warning = self._link_chunk(chunk, [eid])
        self._record(eid, Operation.CREATE, chunk.chunk_id, args["evidence"], certainty, tool, detail=status)
        result = {"status": status, "entity_id": eid, "name": name if status == "created" else existing.name}
        if warning:
            result["sync_warning"] = warning
        return result

    def create_relation(self, args: dict, state: ToolState, tool: str = "create_relation") -> dict:
        ws = self.ws
        head = self._resolve(args["head"])
        tail = self._resolve(args["tail"])
        chunk = self._anchored(args["source_chunk"], args["evidence"])
        try:
            rtype, newly_proposed = ws.schema.resolve(args["relation_type"])
        except ValueError as exc:
            raise SchemaViolation(str(exc)) from None
        confidence = float(args.get("confidence", DEFAULT_CERTAINTY))
        detail = f"schema={rtype.state.value}" if rtype.state is RelationState.PROPOSED else ""

        existing = ws.graph.find_relation(head.entity_id, rtype.name, tail.entity_id)
        if existing is not None:
            refs = existing.evidence_refs + ([chunk.chunk_id] if chunk.chunk_id not in existing.evidence_refs else [])
            ws.graph.update_relation(
                existing.relation_id, evidence_refs=refs, confidence=max(existing.confidence, confidence)
            )
            rid, status = existing.relation_id, "reused"
        else:
            rid = relation_id_for(head.entity_id, rtype.name, tail.entity_id, ws.scope)
            ws.graph.upsert_relation(
                Relation(
                    rid,
                    head.entity_id,
                    tail.entity_id,
                    rtype.name,
                    dict(args.get("properties", {})),
                    confidence,
                    [chunk.chunk_id],
                    scope=ws.scope,
                )
            )
            state.counters["relations"] += 1
            status = "created"
        self._record(
            rid, Operation.CREATE, chunk.chunk_id, args["evidence"], confidence, tool,
            (head.entity_id, tail.entity_id), ";".join(x for x in (status, detail) if x),
        )
        return {
            "status": status,
            "relation_id": rid,
            "relation_type": rtype.name,
            "schema_state": rtype.state.value,
            "schema_proposed_now": newly_proposed,
        }

    # -- update -----------------------------------------------------------

    def update_entity(self, args: dict, state: ToolState, tool: str = "update_entity") -> dict:
        ws = self.ws
        ent = self._resolve(args["entity_name"])
        upd = args["updates"]
        chunk_id, snippet = self._anchor_for(args, ent, ent.entity_id)
        if chunk_id is None:
            raise EvidenceNotAnchored(f"update of {ent.name!r} cites no evidence and has no prior record")
        if "description" in upd:
            ent.description = upd["description"]
        if "entity_type" in upd:
            ent.entity_type = upd["entity_type"]
        if "aliases" in upd:
            ent.aliases |= {a for a in upd["aliases"] if a.casefold() != ent.name.casefold()}
        if "properties" in upd:
            ent.properties.update(upd["properties"])
        if "confidence" in upd:
            ent.confidence = float(upd["confidence"])
        out = ws.sync.sync_object(ent)
        if not out.ok:
            raise SyncFailed(f"update of {ent.name!r} not synced: {out.alert}")
        if "source_chunk" in args:
            self._link_chunk(ws.chunk(args["source_chunk"]), [ent.entity_id])
        ws.sync.resync_hypernodes_with(ent.entity_id)
        self._record(ent.entity_id, Operation.UPDATE, chunk_id, snippet, ent.confidence, tool,
                     detail=args.get("reason", ""))
        return {"status": "updated", "entity_id": ent.entity_id, "fields": sorted(upd)}

    def update_relation(self, args: dict, state: ToolState, tool: str = "update_relation") -> dict:
        ws = self.ws
        rel = self._live_relation(args["relation_id"])
        chunk_id, snippet = self._anchor_for(args, None, rel.relation_id)
        if chunk_id is None:
            raise EvidenceNotAnchored(f"update of {rel.relation_id} cites no evidence and has no prior record")
        changes: dict[str, Any] = {}
        if "source_chunk" in args and args["source_chunk"] not in rel.evidence_refs:
            changes["evidence_refs"] = rel.evidence_refs + [args["source_chunk"]]
        if "confidence" in args:
            changes["confidence"] = float(args["confidence"])
        if "properties" in args:
            changes["properties"] = {**rel.properties, **args["properties"]}
        ws.graph.update_relation(rel.relation_id, **changes)
        conf = changes.get("confidence", rel.confidence)
        self._record(rel.relation_id, Operation.UPDATE, chunk_id, snippet, conf, tool,
                     (rel.head_id, rel.tail_id), args.get("reason", ""))
        return {"status": "updated", "relation_id": rel.relation_id, "fields": sorted(changes)}

    # -- merge ------------------------------------------------------------

    def merge_entity(self, args: dict, state: ToolState, tool: str = "merge_entity") -> dict:
        ws = self.ws
        g = ws.graph
        target = self._resolve(args["target_name"])
        source = self._resolve(args["source_name"])
        if target.entity_id == source.entity_id:
            raise SelfMerge(f"{args['target_name']!r} and {args['source_name']!r} are the same entity")
        chunk_id, snippet = self._anchor_for(args, source, source.entity_id, target.entity_id)

        target.aliases |= {source.name, *source.aliases}
        target.aliases = {a for a in target.aliases if a.casefold() != target.name.casefold()}
        target.properties = {**source.properties, **target.properties}
        target.description = target.description or source.description
        target.confidence = max(target.confidence, source.confidence)
        g.upsert_entity(target)
        g.migrate_evidence(source.entity_id, target.entity_id)

        repointed = collapsed = 0
        for rel in g.incident_relations(source.entity_id):
            head = target.entity_id if rel.head_id == source.entity_id else rel.head_id
            tail = target.entity_id if rel.tail_id == source.entity_id else rel.tail_id
            twin = g.find_relation(head, rel.relation_type, tail)
            if twin is not None and twin.relation_id != rel.relation_id:
                refs = twin.evidence_refs + [r for r in rel.evidence_refs if r not in twin.evidence_refs]
                g.update_relation(twin.relation_id, evidence_refs=refs,
                                  confidence=max(twin.confidence, rel.confidence))
                g.soft_delete_relation(rel.relation_id, f"merged into {twin.relation_id}")
                collapsed += 1
            else:
                g.update_relation(rel.relation_id, head_id=head, tail_id=tail)
                repointed += 1

        ws.sync.delete_entity(source.entity_id, f"merged into {target.entity_id}")
        out = ws.sync.sync_object(g.get_entity(target.entity_id))
        ws.sync.resync_hypernodes_with(target.entity_id)
        state.counters["merges"] += 1
        self._record(
            target.entity_id, Operation.MERGE, chunk_id, snippet, target.confidence, tool,
            (source.entity_id,), args.get("reason", f"merged {source.name!r}"),
        )
        result = {
            "status": "merged",
            "target_id": target.entity_id,
            "source_id": source.entity_id,
            "relations_repointed": repointed,
            "relations_collapsed": collapsed,
        }
        if not out.ok:
            result["sync_warning"] = out.alert
        return result

    def merge_relation(self, args: dict, state: ToolState, tool: str = "merge_relation") -> dict:
        g = self.ws.graph
        if args["target_id"] == args["source_id"]:
            raise SelfMerge(f"cannot merge relation {args['target_id']} into itself")
        target = self._live_relation(args["target_id"])
        source = self._live_relation(args["source_id"])
        chunk_id, snippet = self._anchor_for(args, None, source.relation_id, target.relation_id)
        refs = target.evidence_refs + [r for r in source.evidence_refs if r not in target.evidence_refs]
        conf = max(target.confidence, source.confidence)
        g.update_relation(target.relation_id, evidence_refs=refs, confidence=conf,
                          properties={**source.properties, **target.properties})
        g.soft_delete_relation(source.relation_id, f"merged into {target.relation_id}")
        state.counters["merges"] += 1
        self._record(target.relation_id, Operation.MERGE, chunk_id, snippet, conf, tool,
                     (source.relation_id,), args.get("reason", ""))
        return {"status": "merged", "target_id": target.relation_id, "source_id": source.relation_id}

    # -- delete -----------------------------------------------------------

    def delete_entity(self, args: dict, state: ToolState, tool: str = "delete_entity") -> dict:
        ent = self._resolve(args["entity_name"])
        chunk_id, snippet = self._anchor_for({}, None, ent.entity_id)
        status = self.ws.sync.delete_entity(ent.entity_id, args["reason"])
        self._record(ent.entity_id, Operation.DELETE, chunk_id, snippet, ent.confidence, tool,
                     tuple(status["cascaded"]), args["reason"])
        return status

    def delete_relation(self, args: dict, state: ToolState, tool: str = "delete_relation") -> dict:
        g = self.ws.graph
        rel = g.get_relation(args["relation_id"])
        chunk_id, snippet = self._anchor_for({}, None, rel.relation_id)
        if args.get("soft", True):
            status = g.soft_delete_relation(rel.relation_id, args["reason"])
        else:
            g.remove_object(rel.relation_id)
            status = "purged"
        self._record(rel.relation_id, Operation.DELETE, chunk_id, snippet, rel.confidence, tool,
                     (rel.head_id, rel.tail_id), args["reason"])
        return {"status": status, "relation_id": rel.relation_id}

    # -- batch ------------------------------------------------------------

    def batch_kg_operations(self, args: dict, state: ToolState) -> dict:
        """Run searches, creates, updates, merges, deletes in that order.

        A failing sub-operation is counted and reported; the rest still run.
        """
        counters = {
            "searched": 0,
            "created_entities": 0,
            "reused_entities": 0,
            "created_relations": 0,
            "reused_relations": 0,
            "rejected": 0,
            "updated_entities": 0,
            "updated_relations": 0,
            "merged_entities": 0,
            "merged_relations": 0,
            "deleted_entities": 0,
            "deleted_relations": 0,
            "failed": 0,
        }
        errors: list[dict] = []
        searches = []
        for i, q in enumerate(args.get("searches", [])):
            try:
                _validate(TOOL_SCHEMAS["search_kg"], q, "search_kg")
                searches.append(self.search_kg(q, state))
                counters["searched"] += 1
            except KGWeaveError as exc:
                counters["failed"] += 1
                errors.append({"category": "searches", "index": i, **error_payload("search_kg", exc)})

        for category in ("creates", "updates", "merges", "deletes"):
            for i, item in enumerate(args.get(category, [])):
                kind = item["kind"]
                tool, schema = BATCH_SUBSCHEMAS[(category, kind)]
                sub = {k: v for k, v in item.items() if k != "kind"}
                try:
                    _validate(schema, sub, tool)
                    res = getattr(self, tool)(sub, state)
                except GateRejected as exc:
                    counters["rejected"] += 1
                    errors.append({"category": category, "index": i, **error_payload(tool, exc)})
                    continue
                except (KGWeaveError, ValueError) as exc:
                    counters["failed"] += 1
                    errors.append({"category": category, "index": i, **error_payload(tool, exc)})
                    continue
                plural = "entities" if kind == "entity" else "relations"
                if category == "creates":
                    counters[f"{res['status']}_{plural}"] += 1
                else:
                    counters[f"{category[:-1]}d_{plural}"] += 1
        return {"counters": counters, "errors": errors, "searches": searches}

    # -- review, todo, progress -------------------------------------------

    def mark_for_review(self, args: dict, state: ToolState) -> dict:
        item = ReviewItem(
            state.next_id("review"),
            args["subject"],
            args["reason"],
            args.get("priority", 3),
            args.get("source_chunk") or state.current_chunk,
        )
        state.review_queue.append(item)
        return asdict(item)

    def create_todo(self, args: dict, state: ToolState) -> dict:
        item = TodoItem(
            state.next_id("todo"),
            args["task"],
            args["todo_type"],
            args.get("related_entity", ""),
            args.get("priority", 3),
            dict(args.get("payload", {})),
            state.current_chunk,
        )
        state.todo_queue.append(item)
        return asdict(item)

    def get_progress(self, args: dict, state: ToolState) -> dict:
        counts = self.ws.graph.counts(self.ws.scope)
        return {
            "doc_id": state.doc_id,
            "paragraph_index": state.paragraph_index,
            "paragraph_count": state.chunk_count,
            "entities": counts["entities"],
            "relations": counts["relations"],
            "merges": state.counters["merges"],
            "todos": len(state.todo_queue),
            "review_queue": len(state.review_queue),
        }
