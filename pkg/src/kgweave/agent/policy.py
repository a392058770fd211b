"""Decision policies: the interface the loop talks to and a fixture-driven
implementation that needs no language model.

The scripted policy reads candidate concepts and relations from a script
and walks the reference decision flow: search, then per candidate merge /
update / create / review / todo, then resolve relation endpoints and create
relations or defer them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

from kgweave.corpus import Chunk
from kgweave.graph_store import Entity, normalize_name
from kgweave.toolkit.gate import QualityGate
from kgweave.toolkit.tools import Observation, TodoItem, ToolCall

from kgweave.agent.prompt import Prompt
from kgweave.agent.state import AgentState


@dataclass(frozen=True)
class Decision:
    tool_calls: tuple[ToolCall, ...] = ()
    chunk_complete: Optional[str] = None

    @classmethod
    def complete(cls, summary: str) -> "Decision":
        return cls((), summary)

    @classmethod
    def calls(cls, calls: Sequence[ToolCall]) -> "Decision":
        return cls(tuple(calls), None)


@dataclass
class DecisionContext:
    prompt: Prompt
    chunk: Chunk
    state: AgentState
    round: int
    observations: list[Observation] = field(default_factory=list)
    tool_names: tuple[str, ...] = ()


class DecisionPolicy(Protocol):
    def decide(self, ctx: DecisionContext) -> Decision: ...

    def handle_todo(self, todo: TodoItem, lookup: Callable[[str], list[Entity]]) -> Optional[list[ToolCall]]: ...

    def discover_schema(self, samples: list[str]) -> Optional[dict]: ...


def _norm(s: str) -> str:
    return normalize_name(s)


def pick(matches: Sequence[dict], name: str) -> tuple[Optional[dict], str]:
    """Choose the entity a name refers to: a unique exact-name match wins,
    otherwise a single match; returns (entity, "ok" | "missing" | "ambiguous")."""
    if not matches:
        return None, "missing"
    exact = [m for m in matches if _norm(m["name"]) == _norm(name)]
    if len(exact) == 1:
        return exact[0], "ok"
    if len(matches) == 1:
        return matches[0], "ok"
    return None, "ambiguous"


def _entity_dict(e: Entity) -> dict:
    return {"entity_id": e.entity_id, "name": e.name, "aliases": sorted(e.aliases)}


def load_script(path: str | Path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format_version") != 1:
        raise ValueError(f"{path}: unsupported script format_version {data.get('format_version')}")
    return data


class ScriptedPolicy:
    """Deterministic policy over a script of the form::

        {"format_version": 1,
         "schema": {...discovery output...},
         "documents": {doc_id: {"concepts": [...], "relations": [...]}}}

    A concept or relation belongs to the chunk whose text contains its
    ``evidence``, or to the chunk at index ``paragraph`` when given.
    """

    def __init__(self, script: dict, gate: Optional[QualityGate] = None):
        self.script = script
        self.gate = gate or QualityGate()

    def discover_schema(self, samples: list[str]) -> Optional[dict]:
        return self.script.get("schema")

    def _belongs(self, item: dict, chunk: Chunk) -> bool:
        if "paragraph" in item:
            return item["paragraph"] == chunk.index
        ev = item.get("evidence") or ""
        return bool(ev) and ev in chunk.text

    def candidates(self, chunk: Chunk) -> tuple[list[dict], list[dict]]:
        doc = self.script.get("documents", {}).get(chunk.doc_id, {})
        concepts = [c for c in doc.get("concepts", []) if self._belongs(c, chunk)]
        relations = [r for r in doc.get("relations", []) if self._belongs(r, chunk)]
        return concepts, relations

    def decide(self, ctx: DecisionContext) -> Decision:
        concepts, relations = self.candidates(ctx.chunk)
        stages = (["search", "entities"] if concepts else []) + (["resolve", "relations"] if relations else [])
        stages.append("complete")
        stage = stages[min(ctx.round, len(stages) - 1)]
        cid = ctx.chunk.chunk_id
        obs = {o.call_id: o for o in ctx.observations}

        def call(tag: str, tool: str, **args) -> ToolCall:
            return ToolCall(tool, args, f"{cid}:{stage}:{tag}")

        if stage == "search":
            calls = []
            for j, v in enumerate(concepts):
                calls.append(call(f"c{j}:name", "search_kg", query=v["name"], search_type="fuzzy", limit=10))
                for k, alias in enumerate(v.get("aliases", [])):
                    calls.append(call(f"c{j}:alias{k}", "search_kg", query=alias, search_type="entity", limit=10))
                calls.append(call(f"c{j}:fusion", "explore_fusion", query=v["name"], mode="parallel", top_k=5))
            return Decision.calls(calls)

        if stage == "entities":
            calls = []
            for j, v in enumerate(concepts):
                calls += self._entity_action(j, v, ctx.chunk, obs, call)
            return Decision.calls(calls)

        if stage == "resolve":
            calls = []
            for k, e in enumerate(relations):
                calls.append(call(f"e{k}:head", "search_kg", query=e["head"], search_type="entity", limit=10))
                calls.append(call(f"e{k}:tail", "search_kg", query=e["tail"], search_type="entity", limit=10))
            return Decision.calls(calls)

        if stage == "relations":
            calls = []
            for k, e in enumerate(relations):
                calls += self._relation_action(k, e, ctx.chunk, obs, call)
            return Decision.calls(calls)

        return Decision.complete(
            f"{cid}: considered {len(concepts)} concepts and {len(relations)} relations"
        )

    def _entity_action(self, j, v, chunk, obs, call) -> list[ToolCall]:
        names = {_norm(v["name"])} | {_norm(a) for a in v.get("aliases", [])}
        found: dict[str, dict] = {}
        prefix = f"{chunk.chunk_id}:search:c{j}:"
        for call_id in sorted(obs):
            o = obs[call_id]
            if call_id.startswith(prefix) and o.ok:
                for m in o.result.get("matches", []) + o.result.get("entities", []):
                    found.setdefault(m["entity_id"], m)
        synonyms = [
            m for m in found.values() if names & ({_norm(m["name"])} | {_norm(a) for a in m.get("aliases", [])})
        ]
        synonyms.sort(key=lambda m: (_norm(m["name"]) != _norm(v["name"]), -m.get("confidence", 0), m["entity_id"]))
        evidence = v.get("evidence") or ""
        anchored = bool(evidence) and evidence in chunk.text
        anchor = {"source_chunk": chunk.chunk_id, "evidence": evidence} if anchored else {}

        if synonyms:
            target = synonyms[0]
            calls = [
                call(f"c{j}:merge{i}", "merge_entity", target_name=target["name"], source_name=s["name"],
                     reason=f"same concept as {v['name']!r}", **anchor)
                for i, s in enumerate(synonyms[1:])
            ]
            known = {_norm(target["name"])} | {_norm(a) for s in synonyms for a in s.get("aliases", [])}
            known |= {_norm(s["name"]) for s in synonyms}
            updates = {}
            new_aliases = [n for n in [v["name"], *v.get("aliases", [])] if _norm(n) not in known]
            if new_aliases:
                updates["aliases"] = new_aliases
            if v.get("description") and not target.get("description"):
                updates["description"] = v["description"]
            calls.append(call(f"c{j}:update", "update_entity", entity_name=target["name"], updates=updates,
                              reason="new mention", source_chunk=chunk.chunk_id, **({"evidence": evidence} if anchored else {})))
            return calls

        verdict = self.gate(v["name"])
        if verdict and anchored:
            args = {
                "name": v["name"],
                "entity_type": v.get("entity_type", "Concept"),
                "source_chunk": chunk.chunk_id,
                "evidence": evidence,
                "certainty": v.get("certainty", 0.8),
            }
            for key in ("description", "aliases", "properties"):
                if v.get(key):
                    args[key] = v[key]
            return [call(f"c{j}:create", "create_entity", **args)]
        if not verdict:
            return [call(f"c{j}:review", "mark_for_review", subject=v["name"],
                         reason=f"quality gate rule {verdict.rule}", priority=2, source_chunk=chunk.chunk_id)]
        return [call(f"c{j}:todo", "create_todo", task=f"find evidence for {v['name']}", todo_type="verify",
                     related_entity=v["name"], priority=2, payload={"concept": v})]

    def _relation_action(self, k, e, chunk, obs, call) -> list[ToolCall]:
        def matches(end: str) -> list[dict]:
            o = obs.get(f"{chunk.chunk_id}:resolve:e{k}:{end}")
            return o.result.get("matches", []) if o is not None and o.ok else []

        head, hs = pick(matches("head"), e["head"])
        tail, ts = pick(matches("tail"), e["tail"])
        label = f"{e['head']} {e['relation_type']} {e['tail']}"
        evidence = e.get("evidence") or ""
        anchored = bool(evidence) and evidence in chunk.text
        if hs == ts == "ok" and anchored:
            args = {
                "head": head["name"],
                "relation_type": e["relation_type"],
                "tail": tail["name"],
                "evidence": evidence,
                "source_chunk": chunk.chunk_id,
                "confidence": e.get("confidence", 0.8),
            }
            return [call(f"e{k}:create", "create_relation", **args)]
        if "ambiguous" in (hs, ts):
            return [call(f"e{k}:review", "mark_for_review", subject=label, reason="ambiguous relation endpoint",
                         priority=3, source_chunk=chunk.chunk_id)]
        missing = e["head"] if hs == "missing" else e["tail"]
        payload = {"relation": e, "source_chunk": chunk.chunk_id}
        return [call(f"e{k}:todo", "create_todo", task=f"resolve endpoints of {label}",
                     todo_type="follow_up" if anchored else "verify", related_entity=missing, priority=3,
                     payload=payload)]

    def handle_todo(self, todo: TodoItem, lookup: Callable[[str], list[Entity]]) -> Optional[list[ToolCall]]:
        """Retry deferred relations whose endpoints now resolve; defer everything else."""
        rel = todo.payload.get("relation")
        if todo.todo_type != "follow_up" or not rel:
            return None
        head, hs = pick([_entity_dict(x) for x in lookup(rel["head"])], rel["head"])
        tail, ts = pick([_entity_dict(x) for x in lookup(rel["tail"])], rel["tail"])
        if hs != "ok" or ts != "ok":
            return None
        args = {
            "head": head["name"],
            "relation_type": rel["relation_type"],
            "tail": tail["name"],
            "evidence": rel["evidence"],
            "source_chunk": todo.payload["source_chunk"],
            "confidence": rel.get("confidence", 0.8),
        }
        return [ToolCall("create_relation", args, f"{todo.todo_id}:retry{todo.attempts}")]
