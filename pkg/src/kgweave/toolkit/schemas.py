"""Machine-readable input contracts, one JSON Schema per tool."""

from __future__ import annotations

import json
from pathlib import Path

from kgweave.jsonio import atomic_write

_STR = {"type": "string", "minLength": 1}
_TEXT = {"type": "string"}
_UNIT = {"type": "number", "minimum": 0, "maximum": 1}
_PRIORITY = {"type": "integer", "minimum": 1, "maximum": 5}
_OBJ = {"type": "object"}
_STR_LIST = {"type": "array", "items": _STR}


def _schema(properties: dict, required: list[str], **extra) -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": False,
        **extra,
    }


CREATE_ENTITY = _schema(
    {
        "name": _STR,
        "entity_type": _STR,
        "description": _TEXT,
        "aliases": _STR_LIST,
        "properties": _OBJ,
        "source_chunk": _STR,
        "evidence": _STR,
        "certainty": _UNIT,
    },
    ["name", "entity_type", "source_chunk", "evidence"],
)

CREATE_RELATION = _schema(
    {
        "head": _STR,
        "relation_type": _STR,
        "tail": _STR,
        "evidence": _STR,
        "source_chunk": _STR,
        "confidence": _UNIT,
        "properties": _OBJ,
    },
    ["head", "relation_type", "tail", "evidence", "source_chunk"],
)

UPDATE_ENTITY = _schema(
    {
        "entity_name": _STR,
        "updates": {
            "type": "object",
            "properties": {
                "description": _TEXT,
                "entity_type": _STR,
                "aliases": _STR_LIST,
                "properties": _OBJ,
                "confidence": _UNIT,
            },
            "additionalProperties": False,
        },
        "reason": _TEXT,
        "source_chunk": _STR,
        "evidence": _STR,
    },
    ["entity_name", "updates"],
    dependentRequired={"evidence": ["source_chunk"]},
)

UPDATE_RELATION = _schema(
    {
        "relation_id": _STR,
        "evidence": _STR,
        "confidence": _UNIT,
        "source_chunk": _STR,
        "properties": _OBJ,
        "reason": _TEXT,
    },
    ["relation_id"],
    dependentRequired={"evidence": ["source_chunk"]},
)

MERGE_ENTITY = _schema(
    {"target_name": _STR, "source_name": _STR, "reason": _TEXT, "source_chunk": _STR, "evidence": _STR},
    ["target_name", "source_name"],
    dependentRequired={"evidence": ["source_chunk"]},
)

MERGE_RELATION = _schema(
    {"target_id": _STR, "source_id": _STR, "reason": _TEXT},
    ["target_id", "source_id"],
)

DELETE_ENTITY = _schema({"entity_name": _STR, "reason": _STR}, ["entity_name", "reason"])

DELETE_RELATION = _schema(
    {"relation_id": _STR, "reason": _STR, "soft": {"type": "boolean"}},
    ["relation_id", "reason"],
)

SEARCH_KG = _schema(
    {
        "query": _STR,
        "search_type": {"enum": ["entity", "relation", "fuzzy", "ENTITY", "RELATION", "FUZZY"]},
        "limit": {"type": "integer", "minimum": 1, "maximum": 100},
    },
    ["query"],
)

_BATCH_ITEM = {
    "type": "object",
    "properties": {"kind": {"enum": ["entity", "relation"]}},
    "required": ["kind"],
}

TOOL_SCHEMAS: dict[str, dict] = {
    "read_paragraph": _schema(
        {"paragraph_idx": {"type": "integer", "minimum": 0}, "doc_id": _STR, "purpose": _TEXT},
        ["paragraph_idx", "doc_id"],
    ),
    "browse_context": _schema(
        {
            "query": _TEXT,
            "mode": {"enum": ["local", "kg_neighbors", "document_overview"]},
            "radius": {"type": "integer", "minimum": 1, "maximum": 5},
            "chunk_id": _STR,
        },
        ["mode"],
    ),
    "search_kg": SEARCH_KG,
    "explore_fusion": _schema(
        {
            "query": _STR,
            "mode": {"enum": ["parallel", "vector_first", "graph_first"]},
            "top_k": {"type": "integer", "minimum": 1, "maximum": 100},
        },
        ["query"],
    ),
    "create_entity": CREATE_ENTITY,
    "create_relation": CREATE_RELATION,
    "batch_kg_operations": _schema(
        {
            "searches": {"type": "array", "items": _OBJ},
            "creates": {"type": "array", "items": _BATCH_ITEM},
            "updates": {"type": "array", "items": _BATCH_ITEM},
            "merges": {"type": "array", "items": _BATCH_ITEM},
            "deletes": {"type": "array", "items": _BATCH_ITEM},
        },
        [],
    ),
    "update_entity": UPDATE_ENTITY,
    "update_relation": UPDATE_RELATION,
    "merge_entity": MERGE_ENTITY,
    "merge_relation": MERGE_RELATION,
    "delete_entity": DELETE_ENTITY,
    "delete_relation": DELETE_RELATION,
    "mark_for_review": _schema(
        {"subject": _STR, "reason": _STR, "priority": _PRIORITY, "source_chunk": _STR},
        ["subject", "reason"],
    ),
    "create_todo": _schema(
        {
            "task": _STR,
            "todo_type": {"enum": ["disambiguate", "verify", "attribute_completion", "follow_up"]},
            "related_entity": _TEXT,
            "priority": _PRIORITY,
            "payload": _OBJ,
        },
        ["task", "todo_type"],
    ),
    "get_progress": _schema({}, []),
}

# standalone schema for each batch category and kind
BATCH_SUBSCHEMAS = {
    ("creates", "entity"): ("create_entity", CREATE_ENTITY),
    ("creates", "relation"): ("create_relation", CREATE_RELATION),
    ("updates", "entity"): ("update_entity", UPDATE_ENTITY),
    ("updates", "relation"): ("update_relation", UPDATE_RELATION),
    ("merges", "entity"): ("merge_entity", MERGE_ENTITY),
    ("merges", "relation"): ("merge_relation", MERGE_RELATION),
    ("deletes", "entity"): ("delete_entity", DELETE_ENTITY),
    ("deletes", "relation"): ("delete_relation", DELETE_RELATION),
}

WRITE_TOOLS = frozenset(
    {
        "create_entity",
        "create_relation",
        "update_entity",
        "update_relation",
        "merge_entity",
        "merge_relation",
        "delete_entity",
        "delete_relation",
    }
)


def export_schemas(directory: str | Path) -> list[Path]:
    """Write ``<tool>.schema.json`` for every tool; returns the written paths."""
    out = []
    for name, schema in sorted(TOOL_SCHEMAS.items()):
        p = Path(directory) / f"{name}.schema.json"
        atomic_write(p, json.dumps(schema, indent=2, sort_keys=True) + "\n")
        out.append(p)
    return out
