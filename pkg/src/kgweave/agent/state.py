"""Working memory of a reading session and its configuration."""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional

from kgweave.toolkit.tools import Observation, ReviewItem, TodoItem, ToolState


@dataclass
class AgentConfig:
    max_rounds: int = 12
    observation_window: int = 10
    retry_attempts: int = 3
    retry_base_delay: float = 1.0
    llm_timeout: float = 120.0
    llm_total_timeout: float = 240.0
    prompt_max_chars: int = 16000

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.observation_window < 1:
            raise ValueError("observation_window must be >= 1")
        if self.retry_attempts < 1:
            raise ValueError("retry_attempts must be >= 1")

    @classmethod
    def from_env(cls, **overrides) -> "AgentConfig":
        env = {}
        if "LLM_TIMEOUT" in os.environ:
            env["llm_timeout"] = float(os.environ["LLM_TIMEOUT"])
        if "LLM_TOTAL_TIMEOUT" in os.environ:
            env["llm_total_timeout"] = float(os.environ["LLM_TOTAL_TIMEOUT"])
        env.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**env)


@dataclass
class ErrorRecord:
    error_class: str  # TRANSIENT or PERMANENT
    code: str
    message: str
    chunk_id: Optional[str] = None
    tool: str = ""


@dataclass
class AgentState(ToolState):
    session_id: str = "session"
    recent_observations: list[dict] = field(default_factory=list)
    observation_summary: dict[str, int] = field(default_factory=dict)
    error_history: list[ErrorRecord] = field(default_factory=list)
    round: int = 0
    retry_log: list[dict] = field(default_factory=list)
    summaries: dict[str, str] = field(default_factory=dict)
    observation_window: int = 10

    def push_observation(self, obs: Observation) -> None:
        """Keep the last ``observation_window`` observations; older ones are
        folded into per-tool counts."""
        self.recent_observations.append(obs.to_dict())
        while len(self.recent_observations) > self.observation_window:
            old = self.recent_observations.pop(0)
            key = f"{old['tool_name']}:{'ok' if old['ok'] else 'error'}"
            counts = Counter(self.observation_summary)
            counts[key] += 1
            self.observation_summary = dict(sorted(counts.items()))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AgentState":
        d = dict(d)
        d["todo_queue"] = [TodoItem(**t) for t in d.get("todo_queue", [])]
        d["review_queue"] = [ReviewItem(**r) for r in d.get("review_queue", [])]
        d["error_history"] = [ErrorRecord(**e) for e in d.get("error_history", [])]
        return cls(**d)
