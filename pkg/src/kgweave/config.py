"""Run configuration with layered precedence: flags > env > config file > defaults."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from kgweave.corpus import ChunkerConfig, Strategy
from kgweave.graph_store import IsolationScope
from kgweave.retrieval import Mode, RRF_K

ENV_VARS = {
    "LLM_TIMEOUT": ("llm_timeout", float),
    "LLM_TOTAL_TIMEOUT": ("llm_total_timeout", float),
    "EMBEDDING_DIM": ("embedding_dim", int),
}


@dataclass
class RetrievalDefaults:
    mode: str = Mode.FUSION.value
    top_k: int = 10
    k1: int = 100
    h: int = 2
    rrf_k: int = RRF_K
    kg_timeout: float = 2.0

    def __post_init__(self):
        self.mode = Mode(str(self.mode).upper()).value
        if self.rrf_k <= 0:
            raise ValueError("rrf_k must be positive")


@dataclass
class PolicyConfig:
    script: Optional[str] = None
    endpoint: Optional[str] = None
    model: Optional[str] = None
    api_key_env: str = "LLM_API_KEY"


@dataclass
class RunConfig:
    run_id: str = "run-0"
    tenant_id: str = "default"
    dataset: str = "default"
    root: str = "runs"
    strategy: str = Strategy.STRUCTURAL.value
    chunk_size: int = 800
    chunk_overlap: int = 0
    retrieval: RetrievalDefaults = field(default_factory=RetrievalDefaults)
    embedding_dim: int = 64
    llm_timeout: float = 120.0
    llm_total_timeout: float = 240.0
    max_rounds: int = 12
    require_clean_backends: bool = False
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    clock: str = "logical"

    def __post_init__(self):
        if isinstance(self.retrieval, dict):
            self.retrieval = RetrievalDefaults(**self.retrieval)
        if isinstance(self.policy, dict):
            self.policy = PolicyConfig(**self.policy)
        self.strategy = Strategy(str(self.strategy).upper()).value
        if self.clock not in ("logical", "wall"):
            raise ValueError(f"clock must be 'logical' or 'wall', got {self.clock!r}")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be positive")

    @property
    def scope(self) -> IsolationScope:
        return IsolationScope(self.tenant_id, self.run_id, self.dataset)

    @property
    def chunker(self) -> ChunkerConfig:
        return ChunkerConfig(Strategy(self.strategy), self.chunk_size, self.chunk_overlap)

    @property
    def run_dir(self) -> Path:
        return Path(self.root) / self.tenant_id / self.run_id

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _merge(base: dict, layer: Mapping[str, Any]) -> dict:
    out = dict(base)
    for k, v in layer.items():
        if v is None:
            continue
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def env_layer(env: Mapping[str, str]) -> dict:
    layer = {}
    for var, (key, cast) in ENV_VARS.items():
        if var in env:
            layer[key] = cast(env[var])
    return layer


def load_run_config(
    path: Optional[str | Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Defaults, then the JSON file, then environment, then explicit overrides.

    ``None`` values in any layer mean "not set" and never override.
    """
    merged = RunConfig().to_dict()
    if path is not None:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        data.pop("format_version", None)
        unknown = set(data) - set(merged)
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        merged = _merge(merged, data)
    merged = _merge(merged, env_layer(os.environ if env is None else env))
    merged = _merge(merged, overrides or {})
    return RunConfig(**merged)
