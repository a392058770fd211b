"""System-prompt assembly for the per-paragraph decision loop."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from kgweave.corpus import Chunk
from kgweave.schema import SchemaProfile
from kgweave.toolkit.tools import by_priority

from kgweave.agent.state import AgentState

CONSTRAINTS = {
    "READ": "Identify durable knowledge objects in the paragraph (named methods, datasets, metrics, "
    "systems, people, organisations). Ignore boilerplate and low-value paragraphs.",
    "SEARCH": "Before creating anything, call search_kg, browse_context or explore_fusion to find "
    "existing entities and relations that may already cover the candidate.",
    "VERIFY": "For every candidate choose one action from the search results: create when evidence is "
    "clear and no duplicate exists, update when an existing object needs more detail, merge when the "
    "results show duplicates, mark_for_review when uncertain, create_todo when context is missing.",
    "CONSTRUCT": "Submit entity operations first and relation operations after them. Every write must "
    "cite a verbatim evidence span of the current paragraph. When a write fails, read the error and "
    "correct course: search, switch to update, create a todo, or drop the candidate.",
}

ENTITY_RULES = (
    "Entity names must be short and well formed: no sentence fragments, code, formulas, "
    "PDF debris or generic section headings."
)

CORRECTIONS = {
    "toolkit.SchemaViolation": "Your last call did not match the tool schema; check required fields and types.",
    "toolkit.GateRejected": "An entity name was rejected by the quality gate; shorten or clean it, or drop it.",
    "toolkit.EvidenceNotAnchored": "Evidence must be copied verbatim from the current paragraph.",
    "toolkit.AmbiguousEndpoint": "A relation endpoint matched several entities; mark it for review or merge first.",
    "toolkit.UnknownTool": "Only call tools listed in the tool schema.",
    "toolkit.SelfMerge": "Source and target of a merge must be different objects.",
    "graph_store.NotFound": "The referenced object does not exist; search before updating or relating it.",
}


@dataclass
class Prompt:
    system: str
    user: str
    sections: dict[str, str] = field(default_factory=dict)

    @property
    def text(self) -> str:
        return self.system + "\n\n" + self.user

    def __len__(self) -> int:
        return len(self.text)


def schema_block(profile: Optional[SchemaProfile]) -> str:
    if profile is None:
        return "<active_schema>\n(none)\n</active_schema>"
    lines = [f'<active_schema version="{profile.version}">', f"domain_label: {profile.domain_label}"]
    lines.append("entity_labels: " + ", ".join(profile.entity_labels))
    lines.append("relation_types:")
    for r in profile.relation_types:
        lines.append(f"  - {r.name} ({r.domain_label} -> {r.range_label}) [{r.state.value}]")
    lines.append("attribute_constraints: " + (", ".join(profile.attribute_patterns) or "none"))
    lines.append("</active_schema>")
    return "\n".join(lines)


def _observation_line(o: dict) -> str:
    if o["ok"]:
        res = o.get("result") or {}
        brief = res.get("status") or res.get("search_type") or "ok"
        return f"  - {o['tool_name']}: {brief}"
    err = o.get("error") or {}
    return f"  - {o['tool_name']}: ERROR {err.get('code', '')}"


def working_memory_block(state: AgentState, max_observations: int) -> str:
    lines = ["<working_memory>"]
    lines.append(
        f"progress: document {state.doc_id or '-'}, paragraph {state.paragraph_index + 1}/{state.chunk_count}, "
        f"round {state.round}"
    )
    c = state.counters
    lines.append(f"counters: entities={c['entities']} relations={c['relations']} merges={c['merges']}")
    recent = []
    for o in reversed(state.recent_observations):
        res = o.get("result") or {}
        if o["ok"] and o["tool_name"] == "create_entity" and res.get("name") not in recent:
            recent.append(res.get("name"))
    lines.append("recent_entities: " + (", ".join(recent) or "none"))
    lines.append("recent_observations:")
    for o in state.recent_observations[-max_observations:]:
        lines.append(_observation_line(o))
    if state.observation_summary:
        folded = ", ".join(f"{k}={v}" for k, v in state.observation_summary.items())
        lines.append(f"  (older: {folded})")
    todos = by_priority(state.todo_queue)
    lines.append(f"todo_queue: {len(todos)} open")
    for t in todos[:5]:
        lines.append(f"  - [{t.priority}] {t.todo_type}: {t.task}")
    lines.append("</working_memory>")
    return "\n".join(lines)


def error_block(state: AgentState, last: int = 3) -> str:
    if not state.error_history:
        return ""
    lines = ["<error_correction>"]
    for e in state.error_history[-last:]:
        hint = CORRECTIONS.get(e.code, "Change approach instead of repeating the failed call.")
        lines.append(f"- {e.tool or 'call'} failed with {e.code}: {e.message[:160]}")
        lines.append(f"  correction: {hint}")
    lines.append("</error_correction>")
    return "\n".join(lines)


def assemble_prompt(
    state: AgentState,
    profile: Optional[SchemaProfile],
    chunk: Optional[Chunk] = None,
    max_chars: int = 16000,
    tool_names: tuple[str, ...] = (),
) -> Prompt:
    """Build the system and user messages for one decision round.

    The result never exceeds ``max_chars``: the observation list shrinks
    first, then the paragraph text is truncated.
    """
    constraints = "\n".join(f"{k}: {v}" for k, v in CONSTRAINTS.items())
    head = "You build a knowledge graph by reading one paragraph at a time and calling tools."
    tools = f"Available tools: {', '.join(tool_names)}" if tool_names else ""
    err = error_block(state)
    n_obs = len(state.recent_observations)
    while True:
        wm = working_memory_block(state, n_obs)
        sections = {
            "constraints": f"<cognitive_constraints>\n{constraints}\n{ENTITY_RULES}\n</cognitive_constraints>",
            "schema": schema_block(profile),
            "working_memory": wm,
        }
        if err:
            sections["error_correction"] = err
        system = "\n\n".join(x for x in (head, tools, *sections.values()) if x)
        if len(system) <= max_chars * 3 // 4 or n_obs == 0:
            break
        n_obs -= 1
    system = system[: max_chars * 3 // 4]
    para = ""
    if chunk is not None:
        open_tag, close_tag = f'<paragraph id="{chunk.chunk_id}">\n', "\n</paragraph>"
        budget = max_chars - len(system) - 2 - len(open_tag) - len(close_tag)
        body = chunk.text if len(chunk.text) <= budget else chunk.text[: max(0, budget - 3)] + "..."
        para = open_tag + body + close_tag
    return Prompt(system, para, sections)
