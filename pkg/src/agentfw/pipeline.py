"""Request lifecycle orchestration: authenticate -> guard -> scan input ->
decide -> forward -> validate output -> decide -> log -> respond.

Every exchange appends exactly one SecurityEvent, whatever its fate: allowed,
blocked, quarantined, rate-limited, oversize, or failed upstream. Upstream
failure maps to block (fail-closed).
"""

from __future__ import annotations

import time
import uuid

import httpx

from .config import FirewallConfig, UpstreamTarget
from .envelope import ExchangeOutcome, Message, RequestEnvelope
from .errors import MalformedUpstreamResponse, UnknownRule, UpstreamUnavailable
from .eventlog import EventLog, QuarantineItem, QuarantineQueue, verdict_summary
from .feedback import FeedbackService
from .guard import InflightLimiter, TokenBucketTable
from .metrics import AlertHub, MetricsHub
from .output_check import CanaryToken, redact_for_log, validate
from .rules import Decision, Direction, RuleRegistry, Verdict, stricter
from .scanner import scan

_GUARD_REASONS = {"rate_limited", "concurrency_saturated"}


def _guard_verdict(reason: str, direction: Direction = Direction.INPUT) -> Verdict:
    return Verdict(
        decision=Decision.BLOCK,
        score=0.0,
        matches=(),
        detector_findings=(),
        direction=direction,
        reason=reason,
    )


class GatewayPipeline:
    def __init__(
        self,
        config: FirewallConfig,
        registry: RuleRegistry,
        event_log: EventLog,
        quarantine: QuarantineQueue,
        metrics: MetricsHub,
        alerts: AlertHub,
        feedback: FeedbackService,
    ):
        self.config = config
        self.registry = registry
        self.event_log = event_log
        self.quarantine = quarantine
        self.metrics = metrics
        self.alerts = alerts
        self.feedback = feedback
        self.buckets = TokenBucketTable(config.rate_limit_default, config.rate_limit_per_client)
        self.inflight = InflightLimiter(config.max_inflight)
        self._client = httpx.Client()

    def close(self) -> None:
        self._client.close()

    # -- upstream ----------------------------------------------------------

    def forward_upstream(self, envelope: RequestEnvelope, target: UpstreamTarget) -> list[Message]:
        """POST the wire body to the upstream and parse its messages."""
        body = {
            "messages": [m.to_dict() for m in envelope.messages],
            "metadata": envelope.metadata,
        }
        try:
            response = self._client.post(
                target.base_url, json=body, timeout=target.timeout_ms / 1000.0
            )
        except httpx.HTTPError as exc:
            raise UpstreamUnavailable(f"{target.name}: {exc.__class__.__name__}") from exc
        if response.status_code != 200:
            raise UpstreamUnavailable(f"{target.name}: status {response.status_code}")
        try:
            data = response.json()
        except ValueError as exc:
            raise MalformedUpstreamResponse(f"{target.name}: body is not JSON") from exc
        raw_messages = data.get("messages") if isinstance(data, dict) else None
        if not isinstance(raw_messages, list) or not raw_messages:
            raise MalformedUpstreamResponse(f"{target.name}: missing messages array")
        messages = []
        for m in raw_messages:
            if not isinstance(m, dict) or not isinstance(m.get("content"), str):
                raise MalformedUpstreamResponse(f"{target.name}: malformed message entry")
            messages.append(Message(role=str(m.get("role", "assistant")), content=m["content"]))
        return messages

    def canaries_for(self, target: UpstreamTarget) -> list[CanaryToken]:
        return [CanaryToken(value=v, upstream_name=target.name) for v in target.canary_tokens]

    # -- lifecycle ---------------------------------------------------------

    def handle_exchange(self, envelope: RequestEnvelope, principal_id: str) -> ExchangeOutcome:
        started = time.perf_counter()
        event_id = str(uuid.uuid4())
        acquired = self.inflight.acquire()
        try:
            if not acquired:
                return self._finish_guarded(envelope, event_id, started, "concurrency_saturated")
            # buckets key on the authenticated principal, not anything client-supplied
            bucket_key = principal_id or envelope.client_id
            if not self.buckets.check_and_consume(bucket_key, time.monotonic()):
                return self._finish_guarded(envelope, event_id, started, "rate_limited")
            if envelope.serialized_size() > self.config.max_body_bytes:
                return self._finish_guarded(envelope, event_id, started, "payload_too_large")

            ruleset = self.registry.active  # one snapshot for the whole exchange
            input_verdict = scan(
                envelope, ruleset, self.config.thresholds, self.config.detectors
            )

            if input_verdict.decision is Decision.BLOCK:
                return self._finish(
                    envelope, event_id, started, input_verdict, None, None, input_verdict.reason
                )
            if input_verdict.decision is Decision.QUARANTINE:
                self.quarantine.enqueue(
                    QuarantineItem(
                        event_id=event_id,
                        kind="input",
                        envelope=envelope.to_dict(),
                        matched_rule_ids=input_verdict.matched_rule_ids,
                    )
                )
                return self._finish(
                    envelope, event_id, started, input_verdict, None, None, input_verdict.reason
                )

            target = self.config.upstreams.get(envelope.upstream_name)
            if target is None:
                return self._finish(
                    envelope,
                    event_id,
                    started,
                    input_verdict,
                    _guard_verdict("unknown_upstream", Direction.OUTPUT),
                    None,
                    "unknown_upstream",
                )
            try:
                response = self.forward_upstream(envelope, target)
            except (UpstreamUnavailable, MalformedUpstreamResponse):
                return self._finish(
                    envelope,
                    event_id,
                    started,
                    input_verdict,
                    _guard_verdict("upstream_error", Direction.OUTPUT),
                    None,
                    "upstream_error",
                )

            output_verdict = validate(
                response,
                envelope,
                ruleset,
                self.canaries_for(target),
                self.config.thresholds,
                self.config.detectors,
            )
            if output_verdict.decision is Decision.QUARANTINE:
                self.quarantine.enqueue(
                    QuarantineItem(
                        event_id=event_id,
                        kind="output",
                        envelope=envelope.to_dict(),
                        matched_rule_ids=output_verdict.matched_rule_ids,
                        suppressed_response=[m.to_dict() for m in response],
                    )
                )
            return self._finish(
                envelope,
                event_id,
                started,
                input_verdict,
                output_verdict,
                response,
                output_verdict.reason,
            )
        finally:
            if acquired:
                self.inflight.release()

    def _finish_guarded(
        self, envelope: RequestEnvelope, event_id: str, started: float, reason: str
    ) -> ExchangeOutcome:
        return self._finish(envelope, event_id, started, _guard_verdict(reason), None, None, reason)

    def _finish(
        self,
        envelope: RequestEnvelope,
        event_id: str,
        started: float,
        input_verdict: Verdict,
        output_verdict: Verdict | None,
        response: list[Message] | None,
        reason: str | None,
        related_event_id: str | None = None,
        record_metrics: bool = True,
    ) -> ExchangeOutcome:
        latency_ms = int((time.perf_counter() - started) * 1000)
        decision = input_verdict.decision
        if output_verdict is not None:
            decision = stricter(decision, output_verdict.decision)

        output_summary = None
        if output_verdict is not None:
            digest = None
            if response is not None:
                digest, _ = redact_for_log(response, output_verdict)
            output_summary = verdict_summary(output_verdict, response_digest=digest)

        self.event_log.append(
            client_id=envelope.client_id,
            envelope_digest=envelope.digest(),
            input_verdict=verdict_summary(input_verdict),
            output_verdict=output_summary,
            final_decision=decision.value,
            latency_ms=latency_ms,
            reason=reason,
            event_id=event_id,
            related_event_id=related_event_id,
        )

        matched = input_verdict.matched_rule_ids + (
            output_verdict.matched_rule_ids if output_verdict else []
        )
        rate_limited = reason in _GUARD_REASONS
        if record_metrics:
            self.metrics.record_exchange(
                decision=decision.value,
                latency_ms=latency_ms,
                matched_rule_ids=matched,
                rate_limited=rate_limited,
                upstream_error=reason == "upstream_error",
            )

        if decision is Decision.QUARANTINE:
            self.alerts.publish(
                "quarantine_pending", {"event_id": event_id, "client_id": envelope.client_id}
            )
        elif decision is Decision.BLOCK:
            if reason == "canary_leak":
                self.alerts.publish(
                    "canary_leak", {"event_id": event_id, "client_id": envelope.client_id}
                )
            else:
                self.alerts.publish(
                    "request_blocked",
                    {"event_id": event_id, "client_id": envelope.client_id, "reason": reason},
                )

        # Blocked or quarantined output is suppressed, never returned.
        release_response = None
        if response is not None and decision is Decision.ALLOW:
            release_response = tuple(response)

        return ExchangeOutcome(
            decision=decision,
            input_verdict=input_verdict,
            output_verdict=output_verdict,
            upstream_response=release_response,
            event_id=event_id,
            latency_ms=latency_ms,
            reason=reason,
        )

    # -- quarantine resolution ---------------------------------------------

    def resolve_quarantine(
        self, event_id: str, action: str, label: str, operator
    ) -> dict:
        """Apply an operator decision: feedback for every matched rule, and
        for released input-quarantines a real forward with full output
        validation plus a new linked event."""
        item = self.quarantine.resolve(
            event_id, action, label, operator_id=operator.key_id, operator_role=operator.role
        )
        feedback_records = []
        for rule_id in item.matched_rule_ids:
            try:
                feedback_records.append(
                    self.feedback.apply_feedback(rule_id, label, operator, event_id=event_id)
                )
            except UnknownRule:
                continue  # rule removed since quarantine; nothing to adjust
        release_result = None
        if action == "release" and item.kind == "input":
            release_result = self._forward_released(item)
        return {
            "event_id": event_id,
            "status": item.status,
            "label": label,
            "feedback_applied": [r.to_dict() for r in feedback_records],
            "release": release_result,
        }

    def _forward_released(self, item: QuarantineItem) -> dict:
        data = item.envelope
        envelope = RequestEnvelope(
            envelope_id=data["envelope_id"],
            client_id=data["client_id"],
            received_at=data["received_at"],
            upstream_name=data["upstream_name"],
            messages=tuple(Message(**m) for m in data["messages"]),
            metadata=data.get("metadata", {}),
        )
        started = time.perf_counter()
        new_event_id = str(uuid.uuid4())
        ruleset = self.registry.active
        released_verdict = Verdict(
            decision=Decision.ALLOW,
            score=0.0,
            matches=(),
            detector_findings=(),
            direction=Direction.INPUT,
            reason="released_by_operator",
        )
        target = self.config.upstreams.get(envelope.upstream_name)
        if target is None:
            outcome = self._finish(
                envelope,
                new_event_id,
                started,
                released_verdict,
                _guard_verdict("unknown_upstream", Direction.OUTPUT),
                None,
                "unknown_upstream",
                related_event_id=item.event_id,
                record_metrics=False,
            )
            return {"event_id": new_event_id, "decision": outcome.decision.value}
        try:
            response = self.forward_upstream(envelope, target)
            output_verdict = validate(
                response,
                envelope,
                ruleset,
                self.canaries_for(target),
                self.config.thresholds,
                self.config.detectors,
            )
        except (UpstreamUnavailable, MalformedUpstreamResponse):
            response = None
            output_verdict = _guard_verdict("upstream_error", Direction.OUTPUT)
        outcome = self._finish(
            envelope,
            new_event_id,
            started,
            released_verdict,
            output_verdict,
            response,
            output_verdict.reason,
            related_event_id=item.event_id,
            record_metrics=False,
        )
        return {"event_id": new_event_id, "decision": outcome.decision.value}
