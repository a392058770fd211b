"""Fault-injection wrappers used by the test suite and the fault-injection script.

Each wrapper delegates to a real store or embedder and fails on a seeded
schedule, so a run with a given seed always fails at the same calls.
"""

from __future__ import annotations

import random
from typing import Any, Callable, Optional

import numpy as np

from kgweave.errors import EmbeddingError, GraphTimeout, TransientError, VectorWriteError
from kgweave.graph_store import GraphStore
from kgweave.vector_index import VectorIndex


class FlakyVectorIndex(VectorIndex):
    """Vector index whose inserts fail with probability ``p``."""

    def __init__(self, dimension: int, p: float, seed: int = 0):
        super().__init__(dimension)
        self.p = p
        self._rng = random.Random(seed)
        self.failures = 0

    def insert(self, *args, **kwargs) -> str:
        if self._rng.random() < self.p:
            self.failures += 1
            raise VectorWriteError("injected vector insert failure")
        return super().insert(*args, **kwargs)


class FailingEmbedder:
    """Embedder that raises on every call (or on calls selected by ``when``)."""

    deterministic = True

    def __init__(self, inner, when: Optional[Callable[[str], bool]] = None):
        self.inner = inner
        self.dimension = inner.dimension
        self.when = when or (lambda _text: True)

    def embed(self, text: str) -> np.ndarray:
        if self.when(text):
            raise EmbeddingError("injected embedding failure")
        return self.inner.embed(text)


class WriteBackFailingGraph(GraphStore):
    """Graph store whose embedding-reference write-back fails for selected ids."""

    def __init__(self, fail_ids: Optional[set[str]] = None, fail_all: bool = False):
        super().__init__()
        self.fail_ids = set(fail_ids or ())
        self.fail_all = fail_all

    def set_embedding_ref(self, object_id: str, vec_id: Optional[str]) -> None:
        if self.fail_all or object_id in self.fail_ids:
            raise ConnectionError(f"injected write-back failure for {object_id}")
        super().set_embedding_ref(object_id, vec_id)


class TimeoutGraph(GraphStore):
    """Graph store whose traversals always time out (reads and writes otherwise work)."""

    def bfs_distances(self, *args: Any, **kwargs: Any):
        raise GraphTimeout("injected graph traversal timeout")

    def edges(self, *args: Any, **kwargs: Any):
        raise GraphTimeout("injected graph traversal timeout")

    @classmethod
    def wrap(cls, g: GraphStore) -> "TimeoutGraph":
        t = cls()
        t.__dict__.update(g.__dict__)
        return t


class FlakyCall:
    """Callable that raises ``TransientError`` for its first ``n`` invocations."""

    def __init__(self, fn: Callable[..., Any], n: int, exc: type[Exception] = TransientError):
        self.fn = fn
        self.remaining = n
        self.exc = exc
        self.calls = 0

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        self.calls += 1
        if self.remaining > 0:
            self.remaining -= 1
            raise self.exc("injected transient failure")
        return self.fn(*args, **kwargs)


class CrashingPolicy:
    """Wraps a decision policy and raises once it reaches ``chunk_id`` at ``at_round``."""

    def __init__(self, inner: Any, chunk_id: str, at_round: int = 0, exc: type[Exception] = RuntimeError):
        self.inner = inner
        self.chunk_id = chunk_id
        self.at_round = at_round
        self.exc = exc

    def decide(self, ctx: Any) -> Any:
        if ctx.chunk.chunk_id == self.chunk_id and ctx.round == self.at_round:
            raise self.exc(f"injected crash in {self.chunk_id} round {self.at_round}")
        return self.inner.decide(ctx)

    def __getattr__(self, name: str) -> Any:
        return getattr(self.inner, name)
