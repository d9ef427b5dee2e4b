"""Vulnerability knowledge base: versioned rule sets, pattern matching,
noisy-OR risk scoring, and atomic hot reload.

A RuleSet is immutable once built, so concurrent scans can share it freely;
the only mutation anywhere is the registry's atomic snapshot swap.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum

from .errors import DomainError, InvalidThresholds, ParseError, StaleVersion, ValidationError

WEIGHT_MIN = 0.05
WEIGHT_MAX = 0.99

CATEGORIES = frozenset(
    {"prompt_injection", "jailbreak", "data_leakage", "malicious_code", "pii", "secret", "policy"}
)


class Decision(str, Enum):
    ALLOW = "allow"
    QUARANTINE = "quarantine"
    BLOCK = "block"


# Strictness order used when combining input/output verdicts.
_DECISION_RANK = {Decision.ALLOW: 0, Decision.QUARANTINE: 1, Decision.BLOCK: 2}


def stricter(a: Decision, b: Decision) -> Decision:
    return a if _DECISION_RANK[a] >= _DECISION_RANK[b] else b


class RuleAction(str, Enum):
    SCORE = "score"
    HARD_BLOCK = "hard_block"


class Direction(str, Enum):
    INPUT = "input"
    OUTPUT = "output"


@dataclass(frozen=True)
class Rule:
    id: str
    category: str
    pattern_type: str  # "substring" | "regex"
    pattern: str
    weight: float
    action: RuleAction
    applies_to: str  # "input" | "output" | "both"
    description: str = ""
    compiled: re.Pattern | None = field(default=None, compare=False, repr=False)

    def applies(self, direction: Direction) -> bool:
        return self.applies_to == "both" or self.applies_to == direction.value


@dataclass(frozen=True)
class RuleMatch:
    rule_id: str
    span: tuple[int, int]
    weight_at_match: float
    action: RuleAction = RuleAction.SCORE


@dataclass(frozen=True)
class RuleSet:
    """Immutable, versioned snapshot of all rules."""

    version: int
    rules: tuple[Rule, ...]
    loaded_at: float

    def by_id(self, rule_id: str) -> Rule | None:
        return self._index.get(rule_id)

    @property
    def _index(self) -> dict[str, Rule]:
        # Built once per instance; frozen dataclass forces the object.__setattr__ dance.
        idx = self.__dict__.get("_index_cache")
        if idx is None:
            idx = {r.id: r for r in self.rules}
            object.__setattr__(self, "_index_cache", idx)
        return idx


EMPTY_RULESET = RuleSet(version=0, rules=(), loaded_at=0.0)


@dataclass(frozen=True)
class Verdict:
    """Decision + score + evidence for one direction of traffic.

    detector_findings holds scanner Findings; typed loosely here to keep the
    rule engine independent of the scanner module.
    """

    decision: Decision
    score: float
    matches: tuple[RuleMatch, ...]
    detector_findings: tuple = ()
    direction: Direction = Direction.INPUT
    reason: str | None = None

    @property
    def matched_rule_ids(self) -> list[str]:
        return [m.rule_id for m in self.matches]


@dataclass(frozen=True)
class DecisionThresholds:
    quarantine: float = 0.6
    block: float = 0.9

    def validate(self) -> "DecisionThresholds":
        if not (0.0 < self.quarantine < self.block <= 1.0):
            raise InvalidThresholds(
                f"need 0 < quarantine < block <= 1, got {self.quarantine}, {self.block}"
            )
        return self


def score(weights: list[float]) -> float:
    """Noisy-OR combination: 1 - prod(1 - w).

    Empty input scores 0; order-independent; a weight of 1.0 saturates.
    """
    acc = 1.0
    for w in weights:
        if not (0.0 <= w <= 1.0):
            raise DomainError(f"weight {w!r} outside [0, 1]")
        acc *= 1.0 - w
    return 1.0 - acc


def match_rules(normalized_text: str, ruleset: RuleSet, direction: Direction) -> list[RuleMatch]:
    """Return one match per rule whose pattern occurs in the text.

    Substring matching is exact on the normalized text; regex matching is an
    unanchored search. Each rule is reported at most once, at its first
    occurrence, so repeated hits cannot inflate the score.
    """
    matches: list[RuleMatch] = []
    for rule in ruleset.rules:
        if not rule.applies(direction):
            continue
        if rule.pattern_type == "substring":
            pos = normalized_text.find(rule.pattern)
            if pos < 0:
                continue
            span = (pos, pos + len(rule.pattern))
        else:
            m = rule.compiled.search(normalized_text)  # type: ignore[union-attr]
            if m is None:
                continue
            span = (m.start(), m.end())
        matches.append(RuleMatch(rule.id, span, rule.weight, rule.action))
    return matches


def decide(
    verdict_score: float,
    matched: list[RuleMatch],
    thresholds: DecisionThresholds,
) -> Decision:
    """Map a combined score plus matched-rule evidence to a decision.

    Any hard_block rule wins outright; otherwise the score is banded by the
    thresholds.
    """
    thresholds.validate()
    if not (0.0 <= verdict_score <= 1.0):
        raise DomainError(f"score {verdict_score!r} outside [0, 1]")
    if any(m.action is RuleAction.HARD_BLOCK for m in matched):
        return Decision.BLOCK
    if verdict_score >= thresholds.block:
        return Decision.BLOCK
    if verdict_score >= thresholds.quarantine:
        return Decision.QUARANTINE
    return Decision.ALLOW


def _validate_rule(raw: dict, seen_ids: set[str]) -> Rule:
    rid = raw.get("id")
    if not rid or not isinstance(rid, str):
        raise ValidationError(f"rule missing id: {raw!r}")
    if rid in seen_ids:
        raise ValidationError(f"duplicate rule id {rid!r}")
    category = raw.get("category")
    if category not in CATEGORIES:
        raise ValidationError(f"rule {rid}: unknown category {category!r}")
    pattern_type = raw.get("pattern_type")
    if pattern_type not in ("substring", "regex"):
        raise ValidationError(f"rule {rid}: unknown pattern_type {pattern_type!r}")
    pattern = raw.get("pattern")
    if not isinstance(pattern, str) or pattern == "":
        raise ValidationError(f"rule {rid}: pattern must be a non-empty string")
    compiled = None
    if pattern_type == "regex":
        try:
            compiled = re.compile(pattern)
        except re.error as exc:
            raise ValidationError(f"rule {rid}: regex does not compile: {exc}") from exc
    weight = raw.get("weight")
    if not isinstance(weight, (int, float)) or not (WEIGHT_MIN <= float(weight) <= WEIGHT_MAX):
        raise ValidationError(
            f"rule {rid}: weight {weight!r} outside [{WEIGHT_MIN}, {WEIGHT_MAX}]"
        )
    action = raw.get("action", "score")
    if action not in (RuleAction.SCORE.value, RuleAction.HARD_BLOCK.value):
        raise ValidationError(f"rule {rid}: unknown action {action!r}")
    applies_to = raw.get("applies_to", "input")
    if applies_to not in ("input", "output", "both"):
        raise ValidationError(f"rule {rid}: unknown applies_to {applies_to!r}")
    seen_ids.add(rid)
    return Rule(
        id=rid,
        category=category,
        pattern_type=pattern_type,
        pattern=pattern,
        weight=float(weight),
        action=RuleAction(action),
        applies_to=applies_to,
        description=str(raw.get("description", "")),
        compiled=compiled,
    )


def load_rules(document: bytes | str, previous_version: int = 0) -> RuleSet:
    """Parse and validate a rule file, producing the next immutable RuleSet.

    Rejects the whole document on any invalid rule so a failed reload can
    never leave a half-applied set behind.
    """
    try:
        data = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"rule file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("rules"), list):
        raise ValidationError('rule file must be an object with a "rules" array')
    seen: set[str] = set()
    rules = tuple(_validate_rule(raw, seen) for raw in data["rules"])
    return RuleSet(version=previous_version + 1, rules=rules, loaded_at=time.time())


class RuleRegistry:
    """Holds the active RuleSet and swaps it atomically.

    Readers grab a snapshot reference and keep matching on it even if a swap
    happens mid-scan; no reader ever observes a partial set.
    """

    def __init__(self, initial: RuleSet = EMPTY_RULESET):
        self._active = initial
        self._lock = threading.Lock()

    @property
    def active(self) -> RuleSet:
        return self._active  # reference read is atomic in CPython

    def swap_active(self, new_set: RuleSet) -> int:
        with self._lock:
            previous = self._active.version
            if new_set.version <= previous:
                raise StaleVersion(
                    f"new version {new_set.version} does not advance past {previous}"
                )
            self._active = new_set
            return previous

    def load_and_swap(self, document: bytes | str) -> RuleSet:
        """Validate then activate in one step; failure keeps the old set live."""
        with self._lock:
            new_set = load_rules(document, previous_version=self._active.version)
            self._active = new_set
            return new_set
