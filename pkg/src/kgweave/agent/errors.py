"""Error classification and the retry wrapper for transient failures."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional, TypeVar, Union

from kgweave.errors import (
    EmbeddingError,
    GraphTimeout,
    SyncFailed,
    TransientError,
    UnrecoverableError,
    VectorWriteError,
)

log = logging.getLogger(__name__)
T = TypeVar("T")


class ErrorClass(str, Enum):
    TRANSIENT = "TRANSIENT"
    PERMANENT = "PERMANENT"


_TRANSIENT_TYPES = (TransientError, TimeoutError, ConnectionError, GraphTimeout, VectorWriteError,
                    EmbeddingError, SyncFailed)
# names of third-party exception types, matched without importing their packages
_TRANSIENT_NAMES = {"TimeoutException", "ConnectTimeout", "ReadTimeout", "NetworkError", "ConnectError",
                    "RemoteProtocolError", "RateLimitError"}
_TRANSIENT_CODES = {
    "agent.TransientError",
    "graph_store.GraphTimeout",
    "vector_index.VectorWriteError",
    "vector_index.EmbeddingError",
    "toolkit.SyncFailed",
}


def classify_error(err: Union[BaseException, dict, str]) -> ErrorClass:
    """Timeouts, rate limits and dropped connections are transient; everything
    else (schema violations, id conflicts, failed tool contracts) is permanent.

    Accepts an exception, an observation error payload, or an error code.
    """
    if isinstance(err, dict):
        err = err.get("code", "")
    if isinstance(err, str):
        return ErrorClass.TRANSIENT if err in _TRANSIENT_CODES else ErrorClass.PERMANENT
    if isinstance(err, _TRANSIENT_TYPES):
        return ErrorClass.TRANSIENT
    if any(cls.__name__ in _TRANSIENT_NAMES for cls in type(err).__mro__):
        return ErrorClass.TRANSIENT
    status = getattr(err, "status_code", None)
    if status == 429 or (isinstance(status, int) and status >= 500):
        return ErrorClass.TRANSIENT
    return ErrorClass.PERMANENT


@dataclass
class RetryPolicy:
    attempts: int = 3
    base_delay: float = 1.0
    factor: float = 2.0
    total_timeout: Optional[float] = None
    sleep: Callable[[float], None] = time.sleep
    now: Callable[[], float] = time.monotonic


def with_retry(fn: Callable[[], T], policy: RetryPolicy, retry_log: Optional[list] = None,
               label: str = "") -> T:
    """Call ``fn``; retry transient failures with exponential backoff.

    Permanent errors propagate untouched.  When attempts or the total time
    budget run out, the last transient error is raised as ``UnrecoverableError``.
    """
    start = policy.now()
    delay = policy.base_delay
    for attempt in range(1, policy.attempts + 1):
        try:
            return fn()
        except Exception as exc:
            if classify_error(exc) is ErrorClass.PERMANENT:
                raise
            out_of_time = (
                policy.total_timeout is not None and policy.now() - start + delay > policy.total_timeout
            )
            if attempt == policy.attempts or out_of_time:
                raise UnrecoverableError(f"{label or 'call'} failed after {attempt} attempts: {exc!r}") from exc
            entry: dict[str, Any] = {"label": label, "attempt": attempt, "error": repr(exc), "delay": delay}
            if retry_log is not None:
                retry_log.append(entry)
            log.info("transient failure in %s (attempt %d), retrying in %.2fs", label, attempt, delay)
            policy.sleep(delay)
            delay *= policy.factor
    raise AssertionError("unreachable")
