"""Knowledge-operation tools, the entity quality gate and the provenance ledger."""

from kgweave.toolkit.gate import RULES, GateResult, QualityGate
from kgweave.toolkit.provenance import Operation, ProvenanceLedger, ProvenanceRecord
from kgweave.toolkit.schemas import TOOL_SCHEMAS, WRITE_TOOLS, export_schemas
from kgweave.toolkit.tools import (
    Observation,
    ReviewItem,
    TodoItem,
    ToolCall,
    Toolkit,
    ToolState,
    Workspace,
    by_priority,
)

__all__ = [
    "RULES",
    "GateResult",
    "QualityGate",
    "Operation",
    "ProvenanceLedger",
    "ProvenanceRecord",
    "TOOL_SCHEMAS",
    "WRITE_TOOLS",
    "export_schemas",
    "Observation",
    "ReviewItem",
    "TodoItem",
    "ToolCall",
    "Toolkit",
    "ToolState",
    "Workspace",
    "by_priority",
]
