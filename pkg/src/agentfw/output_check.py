"""Output validation: canary-token leak detection, output-side rule
matching, and output PII scanning before anything is released to a client.

Canary comparison happens on normalized text so zero-width splitting or case
games inside the token cannot hide it.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

from .canonical import sha256_hex
from .envelope import Message, RequestEnvelope
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
from .scanner import DetectorSettings, JointText, NormalizedText, detect_pii, normalize


@dataclass(frozen=True)
class CanaryToken:
    value: str
    upstream_name: str

    def digest(self) -> str:
        """Only this may appear in logs or admin responses."""
        return hashlib.sha256(self.value.encode("utf-8")).hexdigest()


def validate(
    response: list[Message],
    envelope: RequestEnvelope,
    ruleset: RuleSet,
    canaries: list[CanaryToken],
    thresholds: DecisionThresholds | None = None,
    detector_config: dict[str, DetectorSettings] | None = None,
) -> Verdict:
    """Produce the output-side verdict for an upstream response."""
    thresholds = thresholds or DecisionThresholds()
    joint = JointText([m.content for m in response])

    for canary in canaries:
        needle = normalize(canary.value).text
        if needle and needle in joint.text:
            return Verdict(
                decision=Decision.BLOCK,
                score=1.0,
                matches=(),
                detector_findings=(),
                direction=Direction.OUTPUT,
                reason="canary_leak",
            )

    nt = NormalizedText(raw=joint.raw, text=joint.text)
    matches = match_rules(joint.text, ruleset, Direction.OUTPUT)
    findings = [
        dataclasses.replace(f, original_span=joint.to_original_span(f.span))
        for f in detect_pii(nt, detector_config)
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
        direction=Direction.OUTPUT,
        reason=reason,
    )


def redact_for_log(response: list[Message], verdict: Verdict) -> tuple[str, list[str]]:
    """Digest of the full response text plus masked excerpts per finding.

    The full text never reaches the log; excerpts keep only two characters
    of context on each side.
    """
    full_text = "\n".join(m.content for m in response)
    digest = sha256_hex(full_text.encode("utf-8"))
    excerpts = [f.redacted_excerpt for f in verdict.detector_findings]
    return digest, excerpts
