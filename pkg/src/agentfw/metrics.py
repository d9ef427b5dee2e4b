"""Monitoring backend: counters, latency reservoir, EWMA block-rate anomaly
detection, and the persistent alert feed consumed by operators.
"""

from __future__ import annotations

import json
import math
import random
import threading
import time
from dataclasses import dataclass, field

ALERT_KINDS = (
    "quarantine_pending",
    "block_rate_anomaly",
    "chain_broken",
    "canary_leak",
    "upstream_error_burst",
    "request_blocked",
    "audit_rescan_match",
)

# These always ride at critical severity regardless of what the caller says.
_ALWAYS_CRITICAL = {"chain_broken", "canary_leak"}

RESERVOIR_SIZE = 1024
EWMA_LAMBDA = 0.3
DEVIATION_FLOOR = 1.0
ANOMALY_MIN_COUNT = 5
UPSTREAM_ERROR_BURST = 3


@dataclass(frozen=True)
class Alert:
    alert_id: int
    kind: str
    severity: str
    created_at: float
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "kind": self.kind,
            "severity": self.severity,
            "created_at": self.created_at,
            "payload": self.payload,
        }


class AlertHub:
    """Ordered, persistent alert stream with a pluggable delivery sink.

    Sink failure never loses an alert: the feed is served from local state.
    """

    def __init__(self, sink_mode: str = "none", sink_target: str | None = None):
        self.sink_mode = sink_mode
        self.sink_target = sink_target
        self._alerts: list[Alert] = []
        self._lock = threading.Lock()

    def publish(self, kind: str, payload: dict | None = None, severity: str = "warn") -> Alert:
        if kind not in ALERT_KINDS:
            raise ValueError(f"unknown alert kind {kind!r}")
        if kind in _ALWAYS_CRITICAL:
            severity = "critical"
        with self._lock:
            alert = Alert(
                alert_id=len(self._alerts) + 1,
                kind=kind,
                severity=severity,
                created_at=time.time(),
                payload=dict(payload or {}),
            )
            self._alerts.append(alert)
        self._deliver(alert)
        return alert

    def _deliver(self, alert: Alert) -> None:
        try:
            if self.sink_mode == "file" and self.sink_target:
                with open(self.sink_target, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(alert.to_dict()) + "\n")
            elif self.sink_mode == "http" and self.sink_target:
                import httpx

                httpx.post(self.sink_target, json=alert.to_dict(), timeout=2.0)
        except Exception:
            pass  # alert stays retrievable via the feed

    def feed(self, since_id: int = 0) -> list[Alert]:
        with self._lock:
            return [a for a in self._alerts if a.alert_id > since_id]


class BlockAnomalyDetector:
    """EWMA mean/deviation over per-minute block counts.

    mu <- lam*m + (1-lam)*mu ; d <- lam*|m - mu_prev| + (1-lam)*d.
    Alerts when m > mu_prev + 3*max(d_prev, 1.0) and m >= 5. The deviation
    and absolute floors keep a quiet system from alerting on any blip.
    """

    def __init__(self, lam: float = EWMA_LAMBDA):
        self.lam = lam
        self.mu: float | None = None
        self.d = 0.0

    def observe(self, minute_block_count: int) -> bool:
        m = float(minute_block_count)
        if self.mu is None:
            self.mu = m
            self.d = 0.0
            return False
        mu_prev, d_prev = self.mu, self.d
        anomalous = m > mu_prev + 3.0 * max(d_prev, DEVIATION_FLOOR) and m >= ANOMALY_MIN_COUNT
        self.mu = self.lam * m + (1.0 - self.lam) * mu_prev
        self.d = self.lam * abs(m - mu_prev) + (1.0 - self.lam) * d_prev
        return anomalous


class MetricsHub:
    """Counters and latency stats; every update is lock-protected so the
    totals identity (requests = allows+blocks+quarantines+rate_limited)
    survives any interleaving."""

    def __init__(self, alerts: AlertHub | None = None, reservoir_seed: int | None = None):
        self.alerts = alerts
        self.window_start = time.time()
        self._lock = threading.Lock()
        self._totals = {"requests": 0, "allows": 0, "blocks": 0, "quarantines": 0, "rate_limited": 0}
        self._per_rule_hits: dict[str, int] = {}
        self._reservoir: list[int] = []
        self._seen = 0
        self._rng = random.Random(reservoir_seed)
        self._ewma_block_rate = 0.0
        self._detector = BlockAnomalyDetector()
        self._minute = None
        self._minute_blocks = 0
        self._minute_upstream_errors = 0
        self._burst_alerted_minute = None

    def record_exchange(
        self,
        decision: str,
        latency_ms: int,
        matched_rule_ids: list[str] | None = None,
        rate_limited: bool = False,
        upstream_error: bool = False,
        now: float | None = None,
    ) -> None:
        now = time.time() if now is None else now
        pending: list[tuple[str, dict]] = []
        with self._lock:
            self._totals["requests"] += 1
            if rate_limited:
                self._totals["rate_limited"] += 1
            elif decision == "allow":
                self._totals["allows"] += 1
            elif decision == "block":
                self._totals["blocks"] += 1
            elif decision == "quarantine":
                self._totals["quarantines"] += 1
            for rule_id in matched_rule_ids or []:
                self._per_rule_hits[rule_id] = self._per_rule_hits.get(rule_id, 0) + 1
            self._observe_latency(int(latency_ms))
            is_block = 1.0 if decision == "block" and not rate_limited else 0.0
            self._ewma_block_rate = EWMA_LAMBDA * is_block + (1 - EWMA_LAMBDA) * self._ewma_block_rate
            self._roll_minute(now, pending)
            if decision == "block" and not rate_limited:
                self._minute_blocks += 1
            if upstream_error:
                self._minute_upstream_errors += 1
                if (
                    self._minute_upstream_errors == UPSTREAM_ERROR_BURST
                    and self._burst_alerted_minute != self._minute
                ):
                    self._burst_alerted_minute = self._minute
                    pending.append(("upstream_error_burst", {"count": self._minute_upstream_errors}))
        self._emit_all(pending)

    def _observe_latency(self, value: int) -> None:
        self._seen += 1
        if len(self._reservoir) < RESERVOIR_SIZE:
            self._reservoir.append(value)
        else:
            j = self._rng.randrange(self._seen)
            if j < RESERVOIR_SIZE:
                self._reservoir[j] = value

    def _roll_minute(self, now: float, pending: list[tuple[str, dict]]) -> None:
        minute = int(now // 60)
        if self._minute is None:
            self._minute = minute
            return
        if minute != self._minute:
            self._flush_minute_locked(pending)
            self._minute = minute

    def _flush_minute_locked(self, pending: list[tuple[str, dict]]) -> None:
        count = self._minute_blocks
        self._minute_blocks = 0
        self._minute_upstream_errors = 0
        if self._detector.observe(count):
            pending.append(
                ("block_rate_anomaly", {"minute_block_count": count, "mu": self._detector.mu})
            )

    def flush_minute(self) -> None:
        """Close the current minute: feed its block count to the anomaly
        detector. Invoked by the server's minute ticker; rollover also
        happens lazily inside record_exchange."""
        pending: list[tuple[str, dict]] = []
        with self._lock:
            self._flush_minute_locked(pending)
        self._emit_all(pending)

    def _emit_all(self, pending: list[tuple[str, dict]]) -> None:
        if self.alerts is None:
            return
        for kind, payload in pending:
            self.alerts.publish(kind, payload)

    def snapshot(self) -> dict:
        with self._lock:
            ordered = sorted(self._reservoir)
            n = len(ordered)
            latency = {
                "p50": ordered[max(0, math.ceil(0.50 * n) - 1)] if n else 0,
                "p95": ordered[max(0, math.ceil(0.95 * n) - 1)] if n else 0,
                "max": ordered[-1] if n else 0,
            }
            return {
                "window_start": self.window_start,
                "totals": dict(self._totals),
                "per_rule_hits": dict(self._per_rule_hits),
                "latency_ms": latency,
                "ewma_block_rate": self._ewma_block_rate,
            }
