"""Relation-schema discovery, validation, activation and evolution.

A profile is bootstrapped once per run: reuse a registered domain whose
prefix embedding is close enough, otherwise ask a discovery callable for
candidate relations and validate them, otherwise fall back to a small
generic profile.  During construction unseen relation types are either
mapped onto a similar known type or registered as PROPOSED.
"""

from __future__ import annotations

import concurrent.futures
import copy
import json
import re
import threading
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from kgweave.corpus import Document
from kgweave.jsonio import atomic_write
from kgweave.vector_index import EmbeddingProvider, cosine, is_degenerate

FORMAT_VERSION = 1
NAME_RE = re.compile(r"^[A-Z][A-Z0-9_]*$")
PREFIX_CHARS = 2000
SAMPLE_DOCS = 3

GENERIC_LABELS = ("Concept", "Method", "Dataset", "Metric", "Task", "Person", "Organization")
GENERIC_RELATIONS = ("RELATED_TO", "PART_OF", "USES", "EVALUATED_ON", "PROPOSED_BY")


class RelationState(str, Enum):
    ACTIVE = "ACTIVE"
    PROPOSED = "PROPOSED"


@dataclass
class RelationType:
    name: str
    domain_label: str = "Concept"
    range_label: str = "Concept"
    quality_score: float = 1.0
    state: RelationState = RelationState.ACTIVE

    def to_dict(self) -> dict:
        d = asdict(self)
        d["state"] = self.state.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RelationType":
        d = dict(d)
        d["state"] = RelationState(d.get("state", "ACTIVE"))
        return cls(**d)


@dataclass
class SchemaProfile:
    domain_label: str
    relation_types: list[RelationType] = field(default_factory=list)
    entity_labels: list[str] = field(default_factory=list)
    attribute_patterns: list[str] = field(default_factory=list)
    version: int = 1
    prefix_embedding: Optional[list[float]] = None
    ledger: list[dict] = field(default_factory=list)

    def relation(self, name: str) -> Optional[RelationType]:
        for r in self.relation_types:
            if r.name == name:
                return r
        return None

    def active(self) -> list[RelationType]:
        return [r for r in self.relation_types if r.state is RelationState.ACTIVE]

    def proposed(self) -> list[RelationType]:
        return [r for r in self.relation_types if r.state is RelationState.PROPOSED]

    def bump(self, event: str, detail: str) -> None:
        self.version += 1
        self.ledger.append({"version": self.version, "event": event, "detail": detail})

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "domain_label": self.domain_label,
            "version": self.version,
            "entity_labels": list(self.entity_labels),
            "attribute_patterns": list(self.attribute_patterns),
            "relation_types": [r.to_dict() for r in self.relation_types],
            "prefix_embedding": self.prefix_embedding,
            "ledger": list(self.ledger),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SchemaProfile":
        if d.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
            raise ValueError(f"unsupported schema format_version {d.get('format_version')}")
        return cls(
            domain_label=d["domain_label"],
            relation_types=[RelationType.from_dict(r) for r in d.get("relation_types", [])],
            entity_labels=list(d.get("entity_labels", [])),
            attribute_patterns=list(d.get("attribute_patterns", [])),
            version=int(d.get("version", 1)),
            prefix_embedding=d.get("prefix_embedding"),
            ledger=list(d.get("ledger", [])),
        )

    def export(self, path: str | Path) -> None:
        atomic_write(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SchemaProfile":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def normalize_relation_name(name: str) -> str:
    """``worksAt``, ``works at`` and ``works-at`` all become ``WORKS_AT``."""
    s = re.sub(r"([a-z0-9])([A-Z])", r"\1_\2", name.strip())
    s = re.sub(r"[^0-9A-Za-z]+", "_", s).strip("_")
    return s.upper()


def is_valid_relation_name(name: str) -> bool:
    return bool(NAME_RE.match(name))


def _name_text(name: str) -> str:
    return name.replace("_", " ").lower()


@dataclass
class SchemaConfig:
    dedup_threshold: float = 0.9
    quality_floor: float = 0.5
    reuse_threshold: float = 0.85
    discovery_timeout: float = 30.0


@dataclass
class ValidationResult:
    accepted: list[RelationType] = field(default_factory=list)
    merged: list[tuple[str, str]] = field(default_factory=list)
    rejected: list[tuple[str, str]] = field(default_factory=list)
    candidates: list[RelationType] = field(default_factory=list)


def _similar(name: str, pool: Iterable[RelationType], embedder: EmbeddingProvider, threshold: float) -> Optional[str]:
    qv = embedder.embed(_name_text(name))
    best, best_sim = None, threshold
    for r in pool:
        if r.name == name:
            return r.name
        sim = cosine(qv, embedder.embed(_name_text(r.name)))
        if sim > best_sim:
            best, best_sim = r.name, sim
    return best


def validate(
    candidates: Sequence[dict],
    profile: SchemaProfile,
    embedder: EmbeddingProvider,
    cfg: SchemaConfig = SchemaConfig(),
) -> ValidationResult:
    """Classify discovered relation candidates.

    Low-quality candidates are kept aside (``candidates``) rather than dropped.
    """
    out = ValidationResult()
    labels = set(profile.entity_labels)
    pool = list(profile.active())
    for raw in candidates:
        raw_name = str(raw.get("name", ""))
        name = normalize_relation_name(raw_name)
        if not is_valid_relation_name(name):
            out.rejected.append((raw_name, "invalid_name"))
            continue
        dom = raw.get("domain_label", "Concept")
        rng = raw.get("range_label", "Concept")
        if labels and (dom not in labels or rng not in labels):
            out.rejected.append((name, "unresolved_label"))
            continue
        rel = RelationType(name, dom, rng, float(raw.get("quality_score", 1.0)))
        if rel.quality_score < cfg.quality_floor:
            rel.state = RelationState.PROPOSED
            out.candidates.append(rel)
            continue
        twin = _similar(name, pool, embedder, cfg.dedup_threshold)
        if twin is not None:
            out.merged.append((name, twin))
            continue
        out.accepted.append(rel)
        pool.append(rel)
    return out


def evolve(
    profile: SchemaProfile,
    pattern: str,
    embedder: EmbeddingProvider,
    domain_label: str = "Concept",
    range_label: str = "Concept",
    cfg: SchemaConfig = SchemaConfig(),
) -> tuple[SchemaProfile, RelationType, bool]:
    """Map ``pattern`` onto the profile; returns (profile, relation type, reused)."""
    name = normalize_relation_name(pattern)
    if not is_valid_relation_name(name):
        raise ValueError(f"relation pattern {pattern!r} cannot be normalized")
    twin = _similar(name, profile.relation_types, embedder, cfg.dedup_threshold)
    if twin is not None:
        return profile, profile.relation(twin), True
    new = copy.deepcopy(profile)
    rel = RelationType(name, domain_label, range_label, 0.0, RelationState.PROPOSED)
    new.relation_types.append(rel)
    new.bump("propose", name)
    return new, rel, False


def promote(profile: SchemaProfile, name: str) -> SchemaProfile:
    rel = profile.relation(name)
    if rel is None:
        raise KeyError(name)
    if rel.state is RelationState.ACTIVE:
        return profile
    new = copy.deepcopy(profile)
    new.relation(name).state = RelationState.ACTIVE
    new.bump("promote", name)
    return new


def generic_profile() -> SchemaProfile:
    p = SchemaProfile(
        "general",
        [RelationType(n) for n in GENERIC_RELATIONS],
        list(GENERIC_LABELS),
    )
    p.ledger.append({"version": 1, "event": "bootstrap_fallback", "detail": "generic profile"})
    return p


def sample_prefixes(docs: Sequence[Document]) -> list[str]:
    return [d.body[:PREFIX_CHARS] for d in docs[:SAMPLE_DOCS] if d.body.strip()]


def prefix_embedding(samples: Sequence[str], embedder: EmbeddingProvider) -> Optional[np.ndarray]:
    vecs = [embedder.embed(s) for s in samples]
    vecs = [v for v in vecs if not is_degenerate(v)]
    if not vecs:
        return None
    return np.mean(vecs, axis=0)


Discover = Callable[[list[str]], Optional[dict]]


def bootstrap(
    docs: Sequence[Document],
    discover: Optional[Discover],
    embedder: EmbeddingProvider,
    registry: Sequence[SchemaProfile] = (),
    cfg: SchemaConfig = SchemaConfig(),
) -> SchemaProfile:
    """Domain detection and initial schema; never raises."""
    samples = sample_prefixes(docs)
    emb = prefix_embedding(samples, embedder)

    if emb is not None:
        best, best_sim = None, cfg.reuse_threshold
        for prof in registry:
            if prof.prefix_embedding is None:
                continue
            sim = cosine(emb, prof.prefix_embedding)
            if sim > best_sim:
                best, best_sim = prof, sim
        if best is not None:
            return copy.deepcopy(best)

    found = None
    if discover is not None and samples:
        pool = concurrent.futures.ThreadPoolExecutor(max_workers=1)
        try:
            found = pool.submit(discover, samples).result(timeout=cfg.discovery_timeout)
        except Exception:
            found = None
        finally:
            pool.shutdown(wait=False, cancel_futures=True)

    if not found or not isinstance(found, dict):
        prof = generic_profile()
    else:
        labels = list(found.get("entity_labels") or GENERIC_LABELS)
        prof = SchemaProfile(
            str(found.get("domain_label") or "general"),
            [],
            labels,
            list(found.get("attribute_patterns") or []),
        )
        res = validate(found.get("relation_types") or [], prof, embedder, cfg)
        prof.relation_types = res.accepted + res.candidates
        if not prof.relation_types:
            prof.relation_types = [RelationType(n) for n in GENERIC_RELATIONS]
        prof.ledger.append(
            {
                "version": 1,
                "event": "discover",
                "detail": f"accepted={len(res.accepted)} merged={len(res.merged)} "
                f"rejected={len(res.rejected)} candidates={len(res.candidates)}",
            }
        )
    prof.prefix_embedding = [float(x) for x in emb] if emb is not None else None
    return prof


class TTLCache:
    """Small in-process cache with per-entry expiry and prefixed keys."""

    def __init__(self, ttl: float = 3600.0, prefix: str = "schema:", now: Callable[[], float] = time.monotonic):
        self.ttl = ttl
        self.prefix = prefix
        self._now = now
        self._data: dict[str, tuple[float, Any]] = {}
        self._lock = threading.Lock()

    def put(self, key: str, value: Any) -> None:
        with self._lock:
            self._data[self.prefix + key] = (self._now() + self.ttl, value)

    def get(self, key: str) -> Any:
        with self._lock:
            hit = self._data.get(self.prefix + key)
            if hit is None:
                return None
            expires, value = hit
            if self._now() >= expires:
                del self._data[self.prefix + key]
                return None
            return value


class SchemaRegistry:
    """Holds the run's active profile; evolution is serialized by a lock."""

    def __init__(self, profile: SchemaProfile, embedder: EmbeddingProvider, cfg: SchemaConfig = SchemaConfig(),
                 cache: Optional[TTLCache] = None):
        self.profile = profile
        self.embedder = embedder
        self.cfg = cfg
        self.cache = cache or TTLCache()
        self._lock = threading.Lock()
        self.cache.put(profile.domain_label, profile)

    def resolve(self, pattern: str) -> tuple[RelationType, bool]:
        """Returns (relation type, newly proposed)."""
        with self._lock:
            new, rel, reused = evolve(self.profile, pattern, self.embedder, cfg=self.cfg)
            if not reused:
                self.profile = new
                self.cache.put(new.domain_label, new)
            return rel, not reused

    def promote(self, name: str) -> None:
        with self._lock:
            self.profile = promote(self.profile, name)
            self.cache.put(self.profile.domain_label, self.profile)
