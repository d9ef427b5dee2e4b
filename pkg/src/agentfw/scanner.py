"""Input scanning: obfuscation-resistant text normalization plus built-in
detectors for PII, secrets, and code-execution markers.

Normalization order: NFKC, zero-width removal, case-fold, whitespace
collapse, trim. The first three steps are iterated to a fixed point because
case-folding can emit sequences that NFKC would re-compose; a single pass
would break the idempotence guarantee on exotic Unicode.
"""

from __future__ import annotations

import dataclasses
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING

from .errors import DomainError
from .rules import (
    Decision,
    DecisionThresholds,
    Direction,
    RuleSet,
    Verdict,
    decide,
    match_rules,
    score,
)

if TYPE_CHECKING:
    from .envelope import RequestEnvelope

ZERO_WIDTH = ("\u200b", "\u200c", "\u200d", "\ufeff")
_ZW_TABLE = {ord(c): None for c in ZERO_WIDTH}
_WS_RUN = re.compile(r"\s+")

# Hangul V/T jamo are the only starters that compose with a preceding
# starter, so they must not open a normalization segment.
_HANGUL_V = range(0x1161, 0x1176)
_HANGUL_T = range(0x11A8, 0x11C3)

_FOLD_MAX_ROUNDS = 4


def _fold_once(text: str) -> str:
    return unicodedata.normalize("NFKC", text).translate(_ZW_TABLE).casefold()


def _fold(text: str) -> str:
    for _ in range(_FOLD_MAX_ROUNDS):
        folded = _fold_once(text)
        if folded == text:
            return text
        text = folded
    return text


@dataclass(frozen=True)
class NormalizedText:
    """Normalized text plus a lazy map back to original character offsets.

    The map is monotone and always lands inside the original text; within a
    segment that NFKC reshaped it points at the segment start. It is only
    materialized when a finding actually needs original offsets.
    """

    raw: str
    text: str

    @cached_property
    def offset_map(self) -> tuple[int, ...]:
        return tuple(_build_offset_map(self.raw, self.text))

    def to_original_span(self, span: tuple[int, int]) -> tuple[int, int]:
        start, end = span
        if not self.raw or not self.text or end <= start:
            return (0, 0)
        m = self.offset_map
        start = min(start, len(m) - 1)
        last = min(end - 1, len(m) - 1)
        return (m[start], min(m[last] + 1, len(self.raw)))


def normalize(raw: str) -> NormalizedText:
    """Normalize text for matching; idempotent."""
    collapsed = _WS_RUN.sub(" ", _fold(raw)).strip()
    return NormalizedText(raw=raw, text=collapsed)


def _segment_starts(chars: list[str]) -> list[int]:
    starts = []
    for i, ch in enumerate(chars):
        if i == 0:
            starts.append(0)
            continue
        cp = ord(ch)
        if unicodedata.combining(ch) == 0 and cp not in _HANGUL_V and cp not in _HANGUL_T:
            starts.append(i)
    return starts


def _fold_tracked(pairs: list[tuple[str, int]]) -> list[tuple[str, int]]:
    """One fold pass over (char, original_offset) pairs."""
    chars = [c for c, _ in pairs]
    origins = [o for _, o in pairs]
    out: list[tuple[str, int]] = []
    starts = _segment_starts(chars)
    bounds = list(zip(starts, starts[1:] + [len(chars)]))
    pieces = []
    for lo, hi in bounds:
        piece = unicodedata.normalize("NFKC", "".join(chars[lo:hi]))
        pieces.append(piece)
        for ch in piece:
            if ch in ZERO_WIDTH:
                continue
            for folded_ch in ch.casefold():
                out.append((folded_ch, origins[lo]))
    # Segmented NFKC must agree with the whole-string pass; bail out to the
    # caller's fallback if some exotic cross-segment composition disagrees.
    if "".join(pieces) != unicodedata.normalize("NFKC", "".join(chars)):
        raise _SegmentationMismatch
    return out


class _SegmentationMismatch(Exception):
    pass


def _build_offset_map(raw: str, normalized: str) -> list[int]:
    if not normalized:
        return []
    if not raw:
        return [0] * len(normalized)
    try:
        pairs = [(c, i) for i, c in enumerate(raw)]
        for _ in range(_FOLD_MAX_ROUNDS):
            new_pairs = _fold_tracked(pairs)
            if [c for c, _ in new_pairs] == [c for c, _ in pairs]:
                break
            pairs = new_pairs
        # Whitespace collapse: the single replacement space inherits the
        # offset of the first whitespace character of the run.
        collapsed: list[tuple[str, int]] = []
        in_ws = False
        for ch, origin in pairs:
            if ch.isspace():
                if not in_ws:
                    collapsed.append((" ", origin))
                    in_ws = True
            else:
                collapsed.append((ch, origin))
                in_ws = False
        while collapsed and collapsed[0][0] == " ":
            collapsed.pop(0)
        while collapsed and collapsed[-1][0] == " ":
            collapsed.pop()
        if "".join(c for c, _ in collapsed) == normalized:
            return [o for _, o in collapsed]
    except _SegmentationMismatch:
        pass
    # Degraded fallback: monotone proportional map, still in-bounds.
    scale = len(raw) / len(normalized)
    return [min(int(i * scale), len(raw) - 1) for i in range(len(normalized))]


# ---------------------------------------------------------------------------
# Detectors
# ---------------------------------------------------------------------------

DETECTORS = ("email", "credit_card", "ssn_like", "high_entropy_secret", "code_exec_marker")

DEFAULT_DETECTOR_WEIGHTS = {
    "email": 0.3,
    "credit_card": 0.7,
    "ssn_like": 0.7,
    "high_entropy_secret": 0.5,
    "code_exec_marker": 0.6,
}


@dataclass(frozen=True)
class DetectorSettings:
    weight: float
    enabled: bool = True
    params: dict = field(default_factory=dict)


def default_detector_config() -> dict[str, DetectorSettings]:
    return {name: DetectorSettings(weight=w) for name, w in DEFAULT_DETECTOR_WEIGHTS.items()}


@dataclass(frozen=True)
class Finding:
    detector: str
    span: tuple[int, int]  # offsets into normalized text
    weight: float
    redacted_excerpt: str
    original_span: tuple[int, int] | None = None  # filled in by scan()


def mask_value(value: str) -> str:
    """Keep at most 2 leading and 2 trailing characters, mask the middle."""
    if len(value) <= 4:
        keep = 1 if len(value) >= 3 else 0
        return value[:keep] + "…" + (value[-keep:] if keep else "")
    return value[:2] + "…" + value[-2:]


def luhn_valid(digits: str) -> bool:
    """Standard Luhn mod-10 check; raises DomainError on non-digit input."""
    if not digits or not digits.isdigit():
        raise DomainError(f"luhn input must be decimal digits, got {digits!r}")
    total = 0
    for i, ch in enumerate(reversed(digits)):
        d = ord(ch) - 48
        if i % 2 == 1:
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return total % 10 == 0


_EMAIL_RE = re.compile(r"[a-z0-9._%+-]+@[a-z0-9-]+(?:\.[a-z0-9-]+)*\.[a-z]{2,}")
_CARD_RE = re.compile(r"(?<!\d)(?:\d[ -]?){12,18}\d(?!\d)")
_SSN_DASHED_RE = re.compile(r"(?<![\d-])\d{3}[- ]\d{2}[- ]\d{4}(?![\d-])")
_SSN_BARE_RE = re.compile(r"(?<![\d-])\d{9}(?![\d-])")
_TOKEN_RE = re.compile(r"\S+")


def _finding(detector: str, span: tuple[int, int], weight: float, value: str) -> Finding:
    return Finding(detector=detector, span=span, weight=weight, redacted_excerpt=mask_value(value))


def detect_pii(
    text: NormalizedText, config: dict[str, DetectorSettings] | None = None
) -> list[Finding]:
    """Emails, Luhn-valid card numbers, and SSN-shaped digit groups."""
    cfg = config or default_detector_config()
    findings: list[Finding] = []
    t = text.text

    email_cfg = cfg.get("email")
    if email_cfg and email_cfg.enabled:
        for m in _EMAIL_RE.finditer(t):
            findings.append(_finding("email", m.span(), email_cfg.weight, m.group()))

    card_cfg = cfg.get("credit_card")
    if card_cfg and card_cfg.enabled:
        for m in _CARD_RE.finditer(t):
            digits = m.group().replace(" ", "").replace("-", "")
            if 13 <= len(digits) <= 19 and luhn_valid(digits):
                findings.append(_finding("credit_card", m.span(), card_cfg.weight, digits))

    ssn_cfg = cfg.get("ssn_like")
    if ssn_cfg and ssn_cfg.enabled:
        spans_taken = [f.span for f in findings]
        for pattern in (_SSN_DASHED_RE, _SSN_BARE_RE):
            for m in pattern.finditer(t):
                if any(m.start() < e and s < m.end() for s, e in spans_taken):
                    continue  # already claimed by a card finding
                findings.append(_finding("ssn_like", m.span(), ssn_cfg.weight, m.group()))

    return findings


def shannon_entropy(token: str) -> float:
    """Character-level Shannon entropy in bits."""
    if not token:
        return 0.0
    counts = Counter(token)
    n = len(token)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


def detect_high_entropy(
    text: NormalizedText,
    min_len: int = 20,
    threshold_bits: float = 4.0,
    weight: float = DEFAULT_DETECTOR_WEIGHTS["high_entropy_secret"],
) -> list[Finding]:
    """Flag whitespace-delimited tokens that look like random secrets."""
    findings = []
    for m in _TOKEN_RE.finditer(text.text):
        token = m.group()
        if len(token) < min_len:
            continue
        if shannon_entropy(token) >= threshold_bits:
            findings.append(_finding("high_entropy_secret", m.span(), weight, token))
    return findings


# Shell-escape / code-execution markers; category-level patterns live in the
# rule pack, these cover the bare minimum even with an empty rule file.
_CODE_EXEC_MARKERS = (
    "os.system(",
    "subprocess.popen",
    "subprocess.run(",
    "rm -rf /",
    "| sh -",
    "| bash -",
    "$(curl",
    "`rm ",
    "/etc/passwd",
    "nc -e /bin/",
)


def detect_code_exec(
    text: NormalizedText, weight: float = DEFAULT_DETECTOR_WEIGHTS["code_exec_marker"]
) -> list[Finding]:
    findings = []
    for marker in _CODE_EXEC_MARKERS:
        pos = text.text.find(marker)
        if pos >= 0:
            findings.append(
                _finding("code_exec_marker", (pos, pos + len(marker)), weight, marker)
            )
    return findings


def run_detectors(
    text: NormalizedText, config: dict[str, DetectorSettings] | None = None
) -> list[Finding]:
    cfg = config or default_detector_config()
    findings = detect_pii(text, cfg)
    hes = cfg.get("high_entropy_secret")
    if hes and hes.enabled:
        findings.extend(
            detect_high_entropy(
                text,
                min_len=int(hes.params.get("min_len", 20)),
                threshold_bits=float(hes.params.get("threshold_bits", 4.0)),
                weight=hes.weight,
            )
        )
    cem = cfg.get("code_exec_marker")
    if cem and cem.enabled:
        findings.extend(detect_code_exec(text, weight=cem.weight))
    return findings


# ---------------------------------------------------------------------------
# Envelope scan
# ---------------------------------------------------------------------------


class JointText:
    """Per-message normalized texts joined by single newlines.

    Rule and detector spans refer to the joint normalized text; spans map
    back into the newline-joined original contents.
    """

    def __init__(self, contents: list[str]):
        self.parts = [normalize(c) for c in contents]
        self.text = "\n".join(p.text for p in self.parts)
        self.raw = "\n".join(contents)

    def to_original_span(self, span: tuple[int, int]) -> tuple[int, int]:
        start, end = span
        norm_base = 0
        raw_base = 0
        for part in self.parts:
            norm_end = norm_base + len(part.text)
            if start <= norm_end:
                local = (
                    max(0, start - norm_base),
                    max(0, min(end, norm_end) - norm_base),
                )
                s, e = part.to_original_span(local)
                return (raw_base + s, raw_base + e)
            norm_base = norm_end + 1
            raw_base += len(part.raw) + 1
        return (0, 0)


def scan(
    envelope: "RequestEnvelope",
    ruleset: RuleSet,
    thresholds: DecisionThresholds | None = None,
    detector_config: dict[str, DetectorSettings] | None = None,
) -> Verdict:
    """Scan all message contents jointly and produce the input-side verdict."""
    thresholds = thresholds or DecisionThresholds()
    joint = JointText([m.content for m in envelope.messages])
    nt = NormalizedText(raw=joint.raw, text=joint.text)
    matches = match_rules(joint.text, ruleset, Direction.INPUT)
    findings = [
        dataclasses.replace(f, original_span=joint.to_original_span(f.span))
        for f in run_detectors(nt, detector_config)
    ]
    combined = score([m.weight_at_match for m in matches] + [f.weight for f in findings])
    decision = decide(combined, matches, thresholds)
    reason = None
    if decision is not Decision.ALLOW:
        reason = (
            "hard_block_rule"
            if any(m.action.value == "hard_block" for m in matches)
            else "score_threshold"
        )
    return Verdict(
        decision=decision,
        score=combined,
        matches=tuple(matches),
        detector_findings=tuple(findings),
        direction=Direction.INPUT,
        reason=reason,
    )
