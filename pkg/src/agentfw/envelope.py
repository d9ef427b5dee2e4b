"""Wire-level domain types: one client->upstream exchange in flight."""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .canonical import canonical_bytes, digest_obj
from .errors import ValidationError
from .rules import Decision, Verdict

ROLES = ("system", "user", "assistant", "tool")


def rfc3339_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class RequestEnvelope:
    envelope_id: str
    client_id: str
    received_at: str
    upstream_name: str
    messages: tuple[Message, ...]
    metadata: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_wire(cls, body: dict, client_id: str) -> "RequestEnvelope":
        """Build and validate an envelope from the /v1/guard/chat body."""
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        upstream = body.get("upstream")
        if not isinstance(upstream, str) or not upstream:
            raise ValidationError('"upstream" must be a non-empty string')
        raw_messages = body.get("messages")
        if not isinstance(raw_messages, list) or not raw_messages:
            raise ValidationError('"messages" must be a non-empty array')
        messages = []
        for i, m in enumerate(raw_messages):
            if not isinstance(m, dict):
                raise ValidationError(f"messages[{i}] must be an object")
            role = m.get("role")
            content = m.get("content")
            if role not in ROLES:
                raise ValidationError(f"messages[{i}].role must be one of {ROLES}")
            if not isinstance(content, str):
                raise ValidationError(f"messages[{i}].content must be a string")
            messages.append(Message(role=role, content=content))
        metadata = body.get("metadata") or {}
        if not isinstance(metadata, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()
        ):
            raise ValidationError('"metadata" must map strings to strings')
        return cls(
            envelope_id=str(uuid.uuid4()),
            client_id=client_id,
            received_at=rfc3339_now(),
            upstream_name=upstream,
            messages=tuple(messages),
            metadata=dict(metadata),
        )

    def to_dict(self) -> dict:
        return {
            "envelope_id": self.envelope_id,
            "client_id": self.client_id,
            "received_at": self.received_at,
            "upstream_name": self.upstream_name,
            "messages": [m.to_dict() for m in self.messages],
            "metadata": self.metadata,
        }

    def serialized_size(self) -> int:
        return len(canonical_bytes(self.to_dict()))

    def digest(self) -> str:
        return digest_obj(self.to_dict())


@dataclass(frozen=True)
class ExchangeOutcome:
    decision: Decision
    input_verdict: Verdict
    output_verdict: Verdict | None
    upstream_response: tuple[Message, ...] | None
    event_id: str
    latency_ms: int
    reason: str | None = None
