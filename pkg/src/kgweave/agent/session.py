"""The outer reading state machine and the per-paragraph decision loop.

Node order for a session::

    bootstrap_schema -> (read_paragraph -> react_loop -> next_paragraph
                         [-> handle_todos])* -> finish

A file checkpoint is committed after bootstrap and after every
next_paragraph transition.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

from kgweave.corpus import Chunk, ChunkState, Document
from kgweave.errors import TransientError, UnrecoverableError
from kgweave.schema import SchemaRegistry, bootstrap
from kgweave.toolkit.tools import Observation, ReviewItem, Toolkit, ToolCall, Workspace, by_priority

from kgweave.agent.checkpoint import apply_chunk_states, load_checkpoint, restore_workspace, save_checkpoint
from kgweave.agent.errors import ErrorClass, RetryPolicy, classify_error, with_retry
from kgweave.agent.policy import DecisionContext, DecisionPolicy
from kgweave.agent.prompt import assemble_prompt
from kgweave.agent.state import AgentConfig, AgentState, ErrorRecord

log = logging.getLogger(__name__)

AUTO_SUMMARY_PREFIX = "[auto-summary]"


@dataclass
class SessionReport:
    session_id: str
    chunks_total: int
    chunks_archived: int
    counters: dict[str, int]
    graph_counts: dict[str, int]
    provenance_records: int
    alerts: int
    pending_alerts: list[str]
    review_queue: list[dict]
    errors: int
    retries: int
    schema_version: int
    summaries: dict[str, str] = field(default_factory=dict)
    nodes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


class Session:
    """One reading session over a workspace with a pluggable decision policy."""

    def __init__(
        self,
        ws: Workspace,
        policy: DecisionPolicy,
        cfg: Optional[AgentConfig] = None,
        checkpoint_dir: Optional[str | Path] = None,
        session_id: str = "session",
        sleep: Callable[[float], None] = time.sleep,
        state: Optional[AgentState] = None,
    ):
        self.ws = ws
        self.policy = policy
        self.cfg = cfg or AgentConfig()
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
        self.toolkit = Toolkit(ws)
        self.sleep = sleep
        self.state = state or AgentState(session_id=session_id, observation_window=self.cfg.observation_window)
        self.nodes: list[str] = []
        self._seq = 0
        self._bootstrapped = state is not None
        self._resume_from = None

    @classmethod
    def resume(
        cls,
        checkpoint_dir: str | Path,
        policy: DecisionPolicy,
        embedder,
        cfg: Optional[AgentConfig] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> "Session":
        cp = load_checkpoint(checkpoint_dir)
        if cp is None:
            raise UnrecoverableError(f"no checkpoint in {checkpoint_dir}")
        ws = restore_workspace(checkpoint_dir, cp, embedder)
        s = cls(ws, policy, cfg, checkpoint_dir, cp.session_id, sleep, cp.state())
        s._seq = cp.seq + 1
        s._resume_from = cp
        return s

    # -- helpers ----------------------------------------------------------

    def _retry_policy(self, total: Optional[float] = None) -> RetryPolicy:
        return RetryPolicy(self.cfg.retry_attempts, self.cfg.retry_base_delay, total_timeout=total, sleep=self.sleep)

    def _checkpoint(self, chunks: list[Chunk]) -> None:
        if self.checkpoint_dir is None:
            return
        save_checkpoint(self.checkpoint_dir, self.ws, self.state, chunks, self._seq)
        self._seq += 1

    def _record_error(self, obs: Observation, chunk_id: Optional[str]) -> None:
        err = obs.error or {}
        self.state.error_history.append(
            ErrorRecord(classify_error(err).value, err.get("code", ""), err.get("message", ""), chunk_id,
                        obs.tool_name)
        )

    def dispatch(self, call: ToolCall) -> Observation:
        """Run one tool call; transient failures are retried out of the loop's sight."""
        state = self.state

        def attempt() -> Observation:
            obs = self.toolkit.dispatch(call, state)
            if not obs.ok and classify_error(obs.error) is ErrorClass.TRANSIENT:
                raise TransientError(obs.error.get("message", ""))
            return obs

        try:
            return with_retry(attempt, self._retry_policy(), state.retry_log, f"{call.tool_name} {call.call_id}")
        except UnrecoverableError as exc:
            payload = {"tool": call.tool_name, "code": "agent.TransientError", "message": str(exc)}
            return Observation(call.call_id, call.tool_name, False, None, payload)

    # -- nodes ------------------------------------------------------------

    def bootstrap_schema(self, docs: list[Document], registry=()) -> None:
        self.nodes.append("bootstrap_schema")
        discover = getattr(self.policy, "discover_schema", None)
        profile = bootstrap(docs, discover, self.ws.embedder, registry)
        self.ws.schema = SchemaRegistry(profile, self.ws.embedder)

    def react_loop(self, chunk: Chunk) -> str:
        """Decide, act and observe until the policy completes the paragraph or
        the round limit is hit.  Leaves the chunk VERIFIED."""
        self.nodes.append("react_loop")
        state, cfg = self.state, self.cfg
        names = tuple(self.toolkit.names)
        paragraph_obs: list[Observation] = []
        calls = 0
        state.round = 0
        summary = None
        while state.round < cfg.max_rounds:
            prompt = assemble_prompt(state, self.ws.schema.profile, chunk, cfg.prompt_max_chars, names)
            ctx = DecisionContext(prompt, chunk, state, state.round, list(paragraph_obs), names)
            label = f"decide {chunk.chunk_id} round {state.round}"
            try:
                decision = with_retry(lambda: self.policy.decide(ctx), self._retry_policy(cfg.llm_total_timeout),
                                      state.retry_log, label)
            except UnrecoverableError:
                raise
            except Exception as exc:
                raise UnrecoverableError(f"{label} failed: {exc!r}") from exc
            if decision.chunk_complete is not None:
                summary = decision.chunk_complete
                break
            for call in decision.tool_calls:
                obs = self.dispatch(call)
                calls += 1
                paragraph_obs.append(obs)
                state.push_observation(obs)
                if not obs.ok:
                    self._record_error(obs, chunk.chunk_id)
            state.round += 1
        if summary is None:
            failed = sum(1 for o in paragraph_obs if not o.ok)
            summary = (
                f"{AUTO_SUMMARY_PREFIX} {chunk.chunk_id}: stopped after {cfg.max_rounds} rounds, "
                f"{calls} tool calls, {failed} failed"
            )
            state.review_queue.append(
                ReviewItem(state.next_id("review"), chunk.chunk_id, "round limit reached without completion", 3,
                           chunk.chunk_id)
            )
        chunk.advance(ChunkState.VERIFIED)
        state.summaries[chunk.chunk_id] = summary
        return summary

    def handle_todos(self) -> None:
        """Give the policy a chance to resolve deferred cross-paragraph work."""
        self.nodes.append("handle_todos")
        handler = getattr(self.policy, "handle_todo", None)
        ws = self.ws

        def lookup(name: str):
            return ws.graph.lookup(name, ws.scope)

        for todo in by_priority(list(self.state.todo_queue)):
            calls = handler(todo, lookup) if handler is not None else None
            if not calls:
                todo.attempts += 1
                continue
            results = [self.dispatch(c) for c in calls]
            for obs in results:
                self.state.push_observation(obs)
                if not obs.ok:
                    self._record_error(obs, todo.source_chunk)
            if all(o.ok for o in results):
                self.state.todo_queue.remove(todo)
            else:
                todo.attempts += 1

    def finish(self, chunks: list[Chunk]) -> SessionReport:
        """Move unresolved todos to the review queue and aggregate statistics."""
        self.nodes.append("finish")
        state = self.state
        for todo in by_priority(state.todo_queue):
            state.review_queue.append(
                ReviewItem(state.next_id("review"), todo.related_entity or todo.task, f"unresolved todo: {todo.task}",
                           todo.priority, todo.source_chunk)
            )
        state.todo_queue = []
        state.current_chunk = None
        return SessionReport(
            session_id=state.session_id,
            chunks_total=len(chunks),
            chunks_archived=sum(1 for c in chunks if c.state is ChunkState.ARCHIVED),
            counters=dict(state.counters),
            graph_counts=self.ws.graph.counts(self.ws.scope),
            provenance_records=len(self.ws.ledger),
            alerts=len(self.ws.alerts),
            pending_alerts=self.ws.alerts.pending(),
            review_queue=[asdict(r) for r in state.review_queue],
            errors=len(state.error_history),
            retries=len(state.retry_log),
            schema_version=self.ws.schema.profile.version,
            summaries=dict(state.summaries),
            nodes=list(self.nodes),
        )

    # -- driver -----------------------------------------------------------

    def run(self, docs: list[Document], chunks_by_doc: dict[str, list[Chunk]], registry=()) -> SessionReport:
        ws, state = self.ws, self.state
        ordered = [c for d in docs for c in chunks_by_doc.get(d.doc_id, [])]
        for d in docs:
            ws.add_chunks(chunks_by_doc.get(d.doc_id, []), d.title)
        if self._resume_from is not None:
            apply_chunk_states(self._resume_from, ordered)
        if not self._bootstrapped:
            self.bootstrap_schema(docs, registry)
            self._bootstrapped = True
            self._checkpoint(ordered)

        for d in docs:
            chunks = chunks_by_doc.get(d.doc_id, [])
            for chunk in chunks:
                if chunk.state is ChunkState.ARCHIVED:
                    continue
                self.nodes.append("read_paragraph")
                state.doc_id = d.doc_id
                state.paragraph_index = chunk.index
                state.chunk_count = len(chunks)
                state.current_chunk = chunk.chunk_id
                if chunk.state is ChunkState.PENDING:
                    chunk.advance(ChunkState.READING)
                ws.sync.sync_chunk(chunk, (), ws.scope, d.title)
                if chunk.state is ChunkState.READING:
                    self.react_loop(chunk)

                self.nodes.append("next_paragraph")
                chunk.advance(ChunkState.ARCHIVED)
                state.paragraph_index = chunk.index + 1
                state.current_chunk = None
                if state.todo_queue:
                    self.handle_todos()
                self._checkpoint(ordered)
        return self.finish(ordered)


def run_session(
    ws: Workspace,
    docs: list[Document],
    chunks_by_doc: dict[str, list[Chunk]],
    policy: DecisionPolicy,
    cfg: Optional[AgentConfig] = None,
    checkpoint_dir: Optional[str | Path] = None,
    session_id: str = "session",
    sleep: Callable[[float], None] = time.sleep,
) -> SessionReport:
    return Session(ws, policy, cfg, checkpoint_dir, session_id, sleep).run(docs, chunks_by_doc)
