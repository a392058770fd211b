"""Append-only record of every knowledge write and the text that justified it."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from kgweave.clock import Clock, utc_now
from kgweave.jsonio import read_jsonl, write_jsonl


class Operation(str, Enum):
    CREATE = "CREATE"
    UPDATE = "UPDATE"
    MERGE = "MERGE"
    DELETE = "DELETE"


@dataclass(frozen=True)
class ProvenanceRecord:
    prov_id: str
    object_id: str
    source_chunk_id: Optional[str]
    evidence_snippet: str
    operation: Operation
    confidence: float
    timestamp: str
    doc_id: Optional[str] = None
    related_ids: tuple[str, ...] = ()
    tool: str = ""
    detail: str = ""

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["operation"] = self.operation.value
        d["related_ids"] = list(self.related_ids)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProvenanceRecord":
        d = dict(d)
        d["operation"] = Operation(d["operation"])
        d["related_ids"] = tuple(d.get("related_ids", ()))
        return cls(**d)


@dataclass
class ProvenanceLedger:
    clock: Clock = utc_now
    records: list[ProvenanceRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(
        self,
        object_id: str,
        operation: Operation,
        source_chunk_id: Optional[str],
        evidence_snippet: str,
        confidence: float,
        doc_id: Optional[str] = None,
        related_ids: Iterable[str] = (),
        tool: str = "",
        detail: str = "",
    ) -> ProvenanceRecord:
        if not 0.0 <= confidence <= 1.0:
            raise ValueError(f"confidence {confidence} outside [0, 1]")
        rec = ProvenanceRecord(
            prov_id=f"prov-{len(self.records):06d}",
            object_id=object_id,
            source_chunk_id=source_chunk_id,
            evidence_snippet=evidence_snippet,
            operation=Operation(operation),
            confidence=confidence,
            timestamp=self.clock(),
            doc_id=doc_id,
            related_ids=tuple(related_ids),
            tool=tool,
            detail=detail,
        )
        self.records.append(rec)
        return rec

    def trace(
        self,
        document: Optional[str] = None,
        chunk: Optional[str] = None,
        entity: Optional[str] = None,
        relation: Optional[str] = None,
        operation: Optional[Operation | str] = None,
    ) -> list[ProvenanceRecord]:
        """Records matching every given filter, oldest first.

        ``entity``/``relation`` match the record's subject or its related ids.
        """
        op = Operation(operation) if operation is not None else None
        out = []
        for r in self.records:
            if document is not None and r.doc_id != document:
                continue
            if chunk is not None and r.source_chunk_id != chunk:
                continue
            if entity is not None and entity != r.object_id and entity not in r.related_ids:
                continue
            if relation is not None and relation != r.object_id and relation not in r.related_ids:
                continue
            if op is not None and r.operation is not op:
                continue
            out.append(r)
        return out

    def latest_anchor(self, *object_ids: str) -> Optional[ProvenanceRecord]:
        """Most recent record for any of ``object_ids`` that cites a chunk."""
        wanted = set(object_ids)
        for r in reversed(self.records):
            if r.object_id in wanted and r.source_chunk_id is not None:
                return r
        return None

    def dump(self, path: str | Path) -> None:
        write_jsonl(path, (r.to_dict() for r in self.records))

    @classmethod
    def load(cls, path: str | Path, clock: Clock = utc_now) -> "ProvenanceLedger":
        return cls(clock, [ProvenanceRecord.from_dict(d) for d in read_jsonl(path)])
