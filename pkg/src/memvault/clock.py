"""Injectable time sources and RFC 3339 helpers.

The engine never reads the wall clock directly; every component takes a
clock callable so tests can freeze or step time deterministically. All
timestamps are UTC and serialize as RFC 3339 with fixed microsecond
precision (bit-exact round trips matter for the hash chain).
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from typing import Callable

Clock = Callable[[], datetime]

RFC3339_FMT = "%Y-%m-%dT%H:%M:%S.%fZ"


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def to_rfc3339(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).strftime(RFC3339_FMT)


def from_rfc3339(value: str) -> datetime:
    if value.endswith("Z"):
        try:
            return datetime.strptime(value, RFC3339_FMT).replace(tzinfo=timezone.utc)
        except ValueError:
            return datetime.strptime(value, "%Y-%m-%dT%H:%M:%SZ").replace(
                tzinfo=timezone.utc
            )
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


class ManualClock:
    """Clock that moves only when told to.

    Repeated calls return the same instant until ``advance`` is invoked,
    which makes event counts irrelevant to timestamps -- the property the
    restart-determinism suite depends on.
    """

    def __init__(self, start: datetime | None = None):
        self._now = start or datetime(2026, 1, 1, tzinfo=timezone.utc)

    def __call__(self) -> datetime:
        return self._now

    def advance(self, delta: timedelta | float) -> datetime:
        if not isinstance(delta, timedelta):
            delta = timedelta(seconds=delta)
        self._now += delta
        return self._now

    def set(self, instant: datetime) -> None:
        self._now = instant
