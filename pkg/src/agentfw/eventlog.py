"""Firewall memory: append-only hash-chained event log plus the quarantine
queue awaiting operator decisions.

The log is a line-delimited file of canonical JSON records. Every numeric
field is stored as a fixed-format string so the hash preimage is fully
deterministic; each record's hash covers the previous hash, making any
historical edit detectable.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field

from .canonical import GENESIS_HASH, canonical_bytes, format_score
from .envelope import rfc3339_now
from .errors import (
    AlreadyResolved,
    Forbidden,
    NotFound,
    RangeError,
    StorageFailure,
)
from .rules import Verdict


def record_hash(record_without_hash: dict, prev_hash: str) -> str:
    preimage = prev_hash.encode("ascii") + b"\n" + canonical_bytes(record_without_hash)
    return hashlib.sha256(preimage).hexdigest()


def verdict_summary(verdict: Verdict, response_digest: str | None = None) -> dict:
    summary = {
        "decision": verdict.decision.value,
        "score": format_score(verdict.score),
        "matched_rules": list(verdict.matched_rule_ids),
    }
    if response_digest is not None:
        summary["response_digest"] = response_digest
    return summary


class EventLog:
    """Append-only chained SecurityEvent store.

    Appends are serialized through one writer lock and flushed to disk before
    returning; reads work off an in-memory copy of fully persisted records.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = str(path) if path else None
        self._records: list[dict] = []
        self._lock = threading.Lock()
        if self.path and os.path.exists(self.path):
            self._recover()

    def _recover(self) -> None:
        try:
            with open(self.path, "rb") as fh:
                for raw in fh.read().split(b"\n"):
                    if raw.strip():
                        self._records.append(json.loads(raw.decode("utf-8")))
        except (OSError, ValueError) as exc:
            raise StorageFailure(f"event log recovery failed: {exc}") from exc

    @property
    def tip_seq(self) -> int:
        with self._lock:
            return len(self._records) - 1

    def append(
        self,
        *,
        client_id: str,
        envelope_digest: str,
        input_verdict: dict,
        final_decision: str,
        latency_ms: int,
        output_verdict: dict | None = None,
        reason: str | None = None,
        event_id: str | None = None,
        occurred_at: str | None = None,
        audit: dict | None = None,
        related_event_id: str | None = None,
    ) -> dict:
        """Assign the next seq, chain the hashes, persist, then return."""
        with self._lock:
            seq = len(self._records)
            prev_hash = self._records[-1]["hash"] if self._records else GENESIS_HASH
            record = {
                "seq": str(seq),
                "event_id": event_id or str(uuid.uuid4()),
                "occurred_at": occurred_at or rfc3339_now(),
                "client_id": client_id,
                "envelope_digest": envelope_digest,
                "input_verdict": input_verdict,
                "output_verdict": output_verdict,
                "final_decision": final_decision,
                "latency_ms": str(int(latency_ms)),
                "reason": reason,
                "prev_hash": prev_hash,
            }
            if audit is not None:
                record["audit"] = audit
            if related_event_id is not None:
                record["related_event_id"] = related_event_id
            record["hash"] = record_hash(
                {k: v for k, v in record.items() if k != "hash"}, prev_hash
            )
            if self.path:
                try:
                    with open(self.path, "a", encoding="utf-8") as fh:
                        fh.write(canonical_bytes(record).decode("utf-8") + "\n")
                        fh.flush()
                        os.fsync(fh.fileno())
                except OSError as exc:
                    raise StorageFailure(f"event log write failed: {exc}") from exc
            self._records.append(record)
            return record

    def verify_chain(self, from_seq: int, to_seq: int) -> int | None:
        """Recompute every hash in [from_seq, to_seq]; None means clean,
        otherwise the smallest seq that fails any check.

        A persisted line that has gone missing (e.g. two records merged by a
        destroyed newline) counts as broken at that seq, not as a bad range:
        the range is validated against how many records were ever appended.
        """
        lines = self._persisted_lines()
        with self._lock:
            appended = max(len(self._records), len(lines))
        if from_seq < 0 or to_seq < from_seq or to_seq >= appended:
            raise RangeError(f"range [{from_seq}, {to_seq}] not in log of {appended} records")
        prev_hash = None
        if from_seq > 0 and from_seq - 1 < len(lines):
            try:
                prev_hash = json.loads(lines[from_seq - 1].decode("utf-8"))["hash"]
            except (ValueError, KeyError, TypeError):
                prev_hash = None
        for seq in range(from_seq, to_seq + 1):
            if seq >= len(lines):
                return seq
            try:
                record = json.loads(lines[seq].decode("utf-8"))
                if not isinstance(record, dict):
                    return seq
            except ValueError:  # bad bytes or bad JSON: the record is gone
                return seq
            if record.get("seq") != str(seq):
                return seq
            if seq == 0 and record.get("prev_hash") != GENESIS_HASH:
                return seq
            if prev_hash is not None and record.get("prev_hash") != prev_hash:
                return seq
            stored = record.get("hash")
            body = {k: v for k, v in record.items() if k != "hash"}
            if record_hash(body, record.get("prev_hash", "")) != stored:
                return seq
            prev_hash = stored
        return None

    def _persisted_lines(self) -> list[bytes]:
        if self.path and os.path.exists(self.path):
            with open(self.path, "rb") as fh:
                return [ln for ln in fh.read().split(b"\n") if ln.strip()]
        with self._lock:
            return [canonical_bytes(r) for r in self._records]

    def query_events(
        self,
        since_seq: int | None = None,
        client_id: str | None = None,
        decision: str | None = None,
        limit: int = 100,
    ) -> list[dict]:
        """Conjunctive filters, ascending seq order, limit capped at 1000."""
        limit = min(int(limit), 1000)
        with self._lock:
            records = list(self._records)
        out = []
        for record in records:
            if since_seq is not None and int(record["seq"]) < since_seq:
                continue
            if client_id is not None and record["client_id"] != client_id:
                continue
            if decision is not None and record["final_decision"] != decision:
                continue
            out.append(record)
            if len(out) >= limit:
                break
        return out

    def get(self, event_id: str) -> dict | None:
        with self._lock:
            for record in self._records:
                if record["event_id"] == event_id:
                    return record
        return None


# ---------------------------------------------------------------------------
# Quarantine queue
# ---------------------------------------------------------------------------

PENDING = "pending"
RELEASED = "released"
BLOCKED = "blocked"


@dataclass
class QuarantineItem:
    event_id: str
    kind: str  # "input" (held envelope) | "output" (suppressed response)
    envelope: dict
    matched_rule_ids: list[str]
    enqueued_at: float = field(default_factory=time.time)
    suppressed_response: list[dict] | None = None
    status: str = PENDING
    resolved_by: str | None = None
    label: str | None = None

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "kind": self.kind,
            "envelope": self.envelope,
            "matched_rule_ids": self.matched_rule_ids,
            "enqueued_at": self.enqueued_at,
            "suppressed_response": self.suppressed_response,
            "status": self.status,
            "resolved_by": self.resolved_by,
            "label": self.label,
        }


class QuarantineQueue:
    """Pending items keyed by event id; each resolves exactly once."""

    def __init__(self, store_path: str | os.PathLike | None = None):
        self.store_path = str(store_path) if store_path else None
        self._items: dict[str, QuarantineItem] = {}
        self._lock = threading.Lock()
        if self.store_path and os.path.exists(self.store_path):
            self._load()

    def _load(self) -> None:
        with open(self.store_path, "r", encoding="utf-8") as fh:
            for raw in json.load(fh):
                item = QuarantineItem(**raw)
                self._items[item.event_id] = item

    def _persist_locked(self) -> None:
        if not self.store_path:
            return
        tmp = self.store_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump([i.to_dict() for i in self._items.values()], fh)
        os.replace(tmp, self.store_path)

    def enqueue(self, item: QuarantineItem) -> None:
        with self._lock:
            self._items[item.event_id] = item
            self._persist_locked()

    def get(self, event_id: str) -> QuarantineItem | None:
        with self._lock:
            return self._items.get(event_id)

    def list_items(self, status: str | None = PENDING) -> list[QuarantineItem]:
        with self._lock:
            items = [i for i in self._items.values() if status is None or i.status == status]
        return sorted(items, key=lambda i: i.enqueued_at)

    def resolve(self, event_id: str, action: str, label: str, operator_id: str, operator_role: str) -> QuarantineItem:
        """Transition pending -> released|blocked, exactly once, RBAC-gated."""
        if operator_role not in ("operator", "admin"):
            raise Forbidden(f"role {operator_role!r} may not resolve quarantine items")
        if action not in ("release", "block"):
            raise ValueError(f"action must be release or block, got {action!r}")
        if label not in ("tp", "fp"):
            raise ValueError(f"label must be tp or fp, got {label!r}")
        with self._lock:
            item = self._items.get(event_id)
            if item is None:
                raise NotFound(f"no quarantine item for event {event_id!r}")
            if item.status != PENDING:
                raise AlreadyResolved(f"item {event_id!r} already {item.status}")
            item.status = RELEASED if action == "release" else BLOCKED
            item.resolved_by = operator_id
            item.label = label
            self._persist_locked()
            return item
