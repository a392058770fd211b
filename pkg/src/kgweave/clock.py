"""Timestamp sources.  Logical clocks keep ledgers byte-reproducible in tests."""

from __future__ import annotations

import itertools
from datetime import datetime, timedelta, timezone
from typing import Callable

Clock = Callable[[], str]

_EPOCH = datetime(2000, 1, 1, tzinfo=timezone.utc)


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


class LogicalClock:
    """Yields strictly increasing ISO timestamps one microsecond apart."""

    def __init__(self, start: int = 0):
        self._ticks = itertools.count(start)
        self.last = start - 1

    def __call__(self) -> str:
        self.last = next(self._ticks)
        return (_EPOCH + timedelta(microseconds=self.last)).isoformat(timespec="microseconds")

    @property
    def position(self) -> int:
        return self.last + 1
