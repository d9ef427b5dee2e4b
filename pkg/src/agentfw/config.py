"""Service configuration: one JSON file describing listeners, limits,
thresholds, upstreams, detector tuning, and storage paths."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .guard import BucketConfig
from .rules import DecisionThresholds
from .scanner import DetectorSettings, default_detector_config


@dataclass(frozen=True)
class UpstreamTarget:
    name: str
    base_url: str
    timeout_ms: int = 5000
    canary_tokens: tuple[str, ...] = ()

    def __post_init__(self):
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be >= 1")


@dataclass
class FirewallConfig:
    listen_addr: str = "127.0.0.1:8800"
    max_body_bytes: int = 1_048_576
    max_inflight: int = 64
    thresholds: DecisionThresholds = field(default_factory=DecisionThresholds)
    upstreams: dict[str, UpstreamTarget] = field(default_factory=dict)
    rate_limit_default: BucketConfig = field(
        default_factory=lambda: BucketConfig(capacity=20, refill_per_s=5.0)
    )
    rate_limit_per_client: dict[str, BucketConfig] = field(default_factory=dict)
    detectors: dict[str, DetectorSettings] = field(default_factory=default_detector_config)
    rules_file: str | None = None
    key_file: str | None = None
    event_log: str | None = None
    quarantine_store: str | None = None
    feedback_log: str | None = None
    audit_interval_s: int = 300
    alert_sink_mode: str = "none"  # none | file | http
    alert_sink_target: str | None = None
    feedback_alpha: float = 0.2

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | os.PathLike | None = None) -> "FirewallConfig":
        def path_of(key: str) -> str | None:
            value = data.get(key)
            if value is None:
                return None
            return str(Path(base_dir) / value) if base_dir else str(value)

        thresholds = DecisionThresholds(
            quarantine=float(data.get("thresholds", {}).get("quarantine", 0.6)),
            block=float(data.get("thresholds", {}).get("block", 0.9)),
        ).validate()

        upstreams = {}
        for u in data.get("upstreams", []):
            target = UpstreamTarget(
                name=u["name"],
                base_url=u["base_url"],
                timeout_ms=int(u.get("timeout_ms", 5000)),
                canary_tokens=tuple(u.get("canary_tokens", [])),
            )
            upstreams[target.name] = target

        limits = data.get("rate_limits", {})
        default_limit = limits.get("default", {})
        rate_default = BucketConfig(
            capacity=int(default_limit.get("capacity", 20)),
            refill_per_s=float(default_limit.get("refill_per_s", 5.0)),
        )
        per_client = {
            client: BucketConfig(
                capacity=int(c["capacity"]), refill_per_s=float(c["refill_per_s"])
            )
            for client, c in limits.get("per_client", {}).items()
        }

        detectors = default_detector_config()
        for name, d in data.get("detectors", {}).items():
            base = detectors.get(name)
            detectors[name] = DetectorSettings(
                weight=float(d.get("weight", base.weight if base else 0.5)),
                enabled=bool(d.get("enabled", True)),
                params=dict(d.get("params", {})),
            )

        sink = data.get("alert_sink", {})
        return cls(
            listen_addr=data.get("listen_addr", "127.0.0.1:8800"),
            max_body_bytes=int(data.get("max_body_bytes", 1_048_576)),
            max_inflight=int(data.get("max_inflight", 64)),
            thresholds=thresholds,
            upstreams=upstreams,
            rate_limit_default=rate_default,
            rate_limit_per_client=per_client,
            detectors=detectors,
            rules_file=path_of("rules_file"),
            key_file=path_of("key_file"),
            event_log=path_of("event_log"),
            quarantine_store=path_of("quarantine_store"),
            feedback_log=path_of("feedback_log"),
            audit_interval_s=int(data.get("audit_interval_s", 300)),
            alert_sink_mode=sink.get("mode", "none"),
            alert_sink_target=(
                str(Path(base_dir) / sink["target"])
                if base_dir and sink.get("mode") == "file" and sink.get("target")
                else sink.get("target")
            ),
            feedback_alpha=float(data.get("feedback_alpha", 0.2)),
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> "FirewallConfig":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)
