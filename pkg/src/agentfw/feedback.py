"""Relevance & reward: operator labels drive deterministic online weight
updates, so rules that keep firing on benign traffic decay out of the
quarantine band while confirmed hits harden.

The update is an exponential moving average toward target 1 (tp) or 0 (fp):
w' = clamp(w + alpha*(target - w), 0.05, 0.99). A rule's action is never
changed automatically; removing a hard block stays a human decision.
"""

from __future__ import annotations

import dataclasses
import json
import os
import threading
import time
from dataclasses import dataclass

from .auth import Principal
from .errors import Forbidden, UnknownRule
from .rules import WEIGHT_MAX, WEIGHT_MIN, RuleRegistry, RuleSet

DEFAULT_ALPHA = 0.2


@dataclass(frozen=True)
class FeedbackRecord:
    event_id: str
    rule_id: str
    label: str  # "tp" | "fp"
    operator: str
    applied_at: float
    weight_before: float
    weight_after: float

    def to_dict(self) -> dict:
        return vars(self)


def next_weight(weight: float, label: str, alpha: float = DEFAULT_ALPHA) -> float:
    target = 1.0 if label == "tp" else 0.0
    return min(WEIGHT_MAX, max(WEIGHT_MIN, weight + alpha * (target - weight)))


class FeedbackService:
    """Applies labels as new RuleSet versions and keeps the feedback history."""

    def __init__(
        self,
        registry: RuleRegistry,
        alpha: float = DEFAULT_ALPHA,
        log_path: str | os.PathLike | None = None,
    ):
        self.registry = registry
        self.alpha = alpha
        self.log_path = str(log_path) if log_path else None
        self._records: list[FeedbackRecord] = []
        self._lock = threading.Lock()

    def apply_feedback(
        self, rule_id: str, label: str, operator: Principal, event_id: str = ""
    ) -> FeedbackRecord:
        if operator.role not in ("operator", "admin"):
            raise Forbidden(f"role {operator.role!r} may not apply feedback")
        if label not in ("tp", "fp"):
            raise ValueError(f"label must be tp or fp, got {label!r}")
        with self._lock:
            active = self.registry.active
            rule = active.by_id(rule_id)
            if rule is None:
                raise UnknownRule(f"rule {rule_id!r} not in active set v{active.version}")
            updated = dataclasses.replace(rule, weight=next_weight(rule.weight, label, self.alpha))
            rules = tuple(updated if r.id == rule_id else r for r in active.rules)
            new_set = RuleSet(version=active.version + 1, rules=rules, loaded_at=time.time())
            self.registry.swap_active(new_set)
            record = FeedbackRecord(
                event_id=event_id,
                rule_id=rule_id,
                label=label,
                operator=operator.key_id,
                applied_at=time.time(),
                weight_before=rule.weight,
                weight_after=updated.weight,
            )
            self._records.append(record)
            self._persist(record)
            return record

    def _persist(self, record: FeedbackRecord) -> None:
        if not self.log_path:
            return
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_dict()) + "\n")

    def reward_summary(self, window_s: float | None = None) -> dict[str, dict]:
        """Per-rule tp/fp counts inside the window plus the live weight."""
        cutoff = time.time() - window_s if window_s is not None else None
        active = self.registry.active
        summary: dict[str, dict] = {}
        with self._lock:
            records = list(self._records)
        for record in records:
            if cutoff is not None and record.applied_at < cutoff:
                continue
            entry = summary.setdefault(
                record.rule_id, {"tp_count": 0, "fp_count": 0, "current_weight": None}
            )
            entry["tp_count" if record.label == "tp" else "fp_count"] += 1
        for rule_id, entry in summary.items():
            rule = active.by_id(rule_id)
            entry["current_weight"] = rule.weight if rule else None
        return summary

    @property
    def records(self) -> list[FeedbackRecord]:
        with self._lock:
            return list(self._records)
