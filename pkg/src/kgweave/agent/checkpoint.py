"""File checkpoints for a reading session.

Layout of a checkpoint directory::

    checkpoint.json            commit record, written last (atomic rename)
    graph-000003.jsonl         graph store dump
    vectors-000003.jsonl       vector index dump
    provenance-000003.jsonl    provenance ledger
    alerts-000003.jsonl        sync alert log
    schema-000003.json         active schema profile

``checkpoint.json`` names the files of its own sequence number, so a crash
while writing sequence N leaves checkpoint N-1 intact and loadable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from kgweave.clock import Clock, LogicalClock, utc_now
from kgweave.corpus import Chunk, ChunkState
from kgweave.errors import CheckpointError
from kgweave.graph_store import GraphStore, IsolationScope
from kgweave.jsonio import atomic_write
from kgweave.schema import SchemaProfile, SchemaRegistry
from kgweave.sync import AlertLog
from kgweave.toolkit.provenance import ProvenanceLedger
from kgweave.toolkit.tools import Workspace
from kgweave.vector_index import EmbeddingProvider, VectorIndex

from kgweave.agent.state import AgentState

FORMAT_VERSION = 1
COMMIT_FILE = "checkpoint.json"
_PARTS = ("graph", "vectors", "provenance", "alerts", "schema")


@dataclass
class Checkpoint:
    session_id: str
    seq: int
    agent_state: dict
    chunk_states: dict[str, str]
    schema_profile_ref: str
    scope: dict
    clock_position: Optional[int] = None
    files: dict[str, str] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Checkpoint":
        if d.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format_version {d.get('format_version')}")
        return cls(**d)

    def state(self) -> AgentState:
        return AgentState.from_dict(self.agent_state)


def _file_name(part: str, seq: int) -> str:
    ext = "json" if part == "schema" else "jsonl"
    return f"{part}-{seq:06d}.{ext}"


def save_checkpoint(
    directory: str | Path,
    ws: Workspace,
    state: AgentState,
    chunks: list[Chunk],
    seq: int,
) -> Checkpoint:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {part: _file_name(part, seq) for part in _PARTS}
    ws.graph.dump(d / files["graph"])
    ws.index.dump(d / files["vectors"])
    ws.ledger.dump(d / files["provenance"])
    ws.alerts.dump(d / files["alerts"])
    ws.schema.profile.export(d / files["schema"])
    cp = Checkpoint(
        session_id=state.session_id,
        seq=seq,
        agent_state=state.to_dict(),
        chunk_states={c.chunk_id: c.state.value for c in chunks},
        schema_profile_ref=files["schema"],
        scope=ws.scope.to_dict(),
        clock_position=getattr(ws.ledger.clock, "position", None),
        files=files,
    )
    atomic_write(d / COMMIT_FILE, json.dumps(cp.to_dict(), indent=1, sort_keys=True) + "\n")
    # older generations are garbage once the new commit record is in place
    keep = set(files.values())
    for p in d.iterdir():
        if p.name != COMMIT_FILE and p.name.split("-")[0] in _PARTS and p.name not in keep:
            p.unlink()
    return cp


def load_checkpoint(directory: str | Path) -> Optional[Checkpoint]:
    path = Path(directory) / COMMIT_FILE
    if not path.exists():
        return None
    try:
        cp = Checkpoint.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, TypeError) as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    missing = [f for f in cp.files.values() if not (Path(directory) / f).exists()]
    if missing:
        raise CheckpointError(f"{path}: missing files {missing}")
    return cp


def restore_workspace(directory: str | Path, cp: Checkpoint, embedder: EmbeddingProvider) -> Workspace:
    """Rebuild stores, ledgers and schema from a checkpoint.

    A session that ran on a logical clock resumes the same clock position,
    so timestamps written after resume match an uninterrupted run.
    """
    d = Path(directory)
    clock: Clock = LogicalClock(cp.clock_position) if cp.clock_position is not None else utc_now
    index = VectorIndex.load(d / cp.files["vectors"])
    if index.dimension != embedder.dimension:
        raise CheckpointError(f"checkpoint index has dimension {index.dimension}, embedder {embedder.dimension}")
    profile = SchemaProfile.load(d / cp.schema_profile_ref)
    return Workspace(
        graph=GraphStore.load(d / cp.files["graph"]),
        index=index,
        embedder=embedder,
        schema=SchemaRegistry(profile, embedder),
        scope=IsolationScope.from_dict(cp.scope),
        ledger=ProvenanceLedger.load(d / cp.files["provenance"], clock),
        alerts=AlertLog.load(d / cp.files["alerts"], clock),
    )


def apply_chunk_states(cp: Checkpoint, chunks: list[Chunk]) -> None:
    """Move freshly chunked documents to their checkpointed lifecycle states."""
    for c in chunks:
        saved = cp.chunk_states.get(c.chunk_id)
        if saved is None:
            continue
        c.advance(ChunkState(saved))
