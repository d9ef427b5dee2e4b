"""Denial-of-service guard: per-client token buckets with continuous refill,
a global in-flight concurrency cap, and stale-bucket eviction.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

from .errors import ClockRegression


@dataclass(frozen=True)
class BucketConfig:
    capacity: int
    refill_per_s: float

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.refill_per_s <= 0:
            raise ValueError("refill_per_s must be > 0")


@dataclass
class BucketState:
    tokens: float
    last_refill: float


class TokenBucketTable:
    """Keyed token buckets; refill+consume is atomic per bucket.

    New clients start with a full bucket. Timestamps are caller-supplied and
    must come from a monotonic clock.
    """

    def __init__(self, default: BucketConfig, per_client: dict[str, BucketConfig] | None = None):
        self.default = default
        self.per_client = dict(per_client or {})
        self._buckets: dict[str, BucketState] = {}
        self._lock = threading.Lock()

    def config_for(self, client_id: str) -> BucketConfig:
        return self.per_client.get(client_id, self.default)

    def check_and_consume(self, client_id: str, now: float) -> bool:
        """Refill from elapsed time, then take one whole token if available.

        Returns True for allowed, False for denied; never consumes partially.
        """
        cfg = self.config_for(client_id)
        with self._lock:
            state = self._buckets.get(client_id)
            if state is None:
                state = BucketState(tokens=float(cfg.capacity), last_refill=now)
                self._buckets[client_id] = state
            if now < state.last_refill:
                raise ClockRegression(
                    f"now={now} precedes last_refill={state.last_refill} for {client_id!r}"
                )
            state.tokens = min(float(cfg.capacity), state.tokens + cfg.refill_per_s * (now - state.last_refill))
            state.last_refill = now
            if state.tokens >= 1.0:
                state.tokens -= 1.0
                return True
            return False

    def retry_after_s(self, client_id: str) -> int:
        """Seconds until one full token accrues, for the Retry-After header."""
        cfg = self.config_for(client_id)
        with self._lock:
            state = self._buckets.get(client_id)
            tokens = state.tokens if state else float(cfg.capacity)
        return max(0, math.ceil((1.0 - tokens) / cfg.refill_per_s))

    def evict_stale(self, now: float, idle_factor: float = 10.0) -> int:
        """Drop buckets idle longer than idle_factor * capacity/refill seconds.

        Re-created buckets start full, which only favors idle clients.
        """
        evicted = 0
        with self._lock:
            for client_id in list(self._buckets):
                cfg = self.config_for(client_id)
                horizon = idle_factor * cfg.capacity / cfg.refill_per_s
                if now - self._buckets[client_id].last_refill > horizon:
                    del self._buckets[client_id]
                    evicted += 1
        return evicted

    def __len__(self) -> int:
        with self._lock:
            return len(self._buckets)


class InflightLimiter:
    """Global cap on concurrently handled exchanges; saturation is a value,
    not an error, and slots are released on every exit path."""

    def __init__(self, limit: int):
        if limit < 1:
            raise ValueError("limit must be >= 1")
        self.limit = limit
        self._count = 0
        self._lock = threading.Lock()

    def acquire(self) -> bool:
        with self._lock:
            if self._count >= self.limit:
                return False
            self._count += 1
            return True

    def release(self) -> None:
        with self._lock:
            if self._count > 0:
                self._count -= 1

    @property
    def in_flight(self) -> int:
        with self._lock:
            return self._count
