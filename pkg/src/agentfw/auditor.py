"""Scheduled security jobs: hash-chain verification, retroactive rescans of
retained quarantine payloads, and stale rate-limit bucket eviction.

One driver thread ticks at a fixed interval; each job runs under its own
non-blocking lock so a slow job is skipped rather than piled up. Job
failures land in the report, never in the scheduler.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from .canonical import digest_obj, format_score
from .envelope import rfc3339_now
from .eventlog import EventLog, QuarantineQueue
from .guard import TokenBucketTable
from .metrics import AlertHub
from .rules import Direction, RuleRegistry, match_rules
from .scanner import JointText


@dataclass
class AuditReport:
    run_id: str
    started_at: str
    finished_at: str = ""
    chain_result: str = "clean"
    rescan_findings: list[dict] = field(default_factory=list)
    jobs_run: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    ruleset_version: int = 0

    def to_audit_dict(self) -> dict:
        """String-typed view that goes into the chained event record."""
        return {
            "run_id": self.run_id,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "chain_result": self.chain_result,
            "rescan_findings": [
                {"event_id": f["event_id"], "rule_ids": list(f["rule_ids"])}
                for f in self.rescan_findings
            ],
            "jobs_run": list(self.jobs_run),
            "failures": list(self.failures),
            "ruleset_version": str(self.ruleset_version),
        }


class Auditor:
    def __init__(
        self,
        event_log: EventLog,
        quarantine: QuarantineQueue,
        registry: RuleRegistry,
        alerts: AlertHub,
        buckets: TokenBucketTable | None = None,
    ):
        self.event_log = event_log
        self.quarantine = quarantine
        self.registry = registry
        self.alerts = alerts
        self.buckets = buckets
        self._job_locks: dict[str, threading.Lock] = {}
        self._jobs: dict[str, callable] = {}
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.register_job("security_audit", self._security_audit_job)
        if buckets is not None:
            self.register_job("bucket_eviction", self._bucket_eviction_job)

    def register_job(self, name: str, job) -> None:
        self._jobs[name] = job
        self._job_locks[name] = threading.Lock()

    # -- audit content -------------------------------------------------------

    def audit_once(self) -> AuditReport:
        """Chain verification plus a rescan of retained payloads against the
        current rule set; appends its own report to the event log."""
        report = AuditReport(run_id=str(uuid.uuid4()), started_at=rfc3339_now())
        with self._job_locks["security_audit"]:
            self._run_audit_into(report)
            report.jobs_run.append("security_audit")
        self._append_report(report)
        return report

    def _run_audit_into(self, report: AuditReport) -> None:
        report.ruleset_version = self.registry.active.version
        tip = self.event_log.tip_seq
        try:
            broken = self.event_log.verify_chain(0, tip) if tip >= 0 else None
        except Exception as exc:
            report.failures.append(f"verify_chain: {exc}")
            broken = None
        if broken is not None:
            report.chain_result = f"broken_at:{broken}"
            self.alerts.publish("chain_broken", {"seq": broken})
        else:
            report.chain_result = "clean"
        try:
            report.rescan_findings = self._rescan_payloads()
        except Exception as exc:
            report.failures.append(f"rescan: {exc}")
        if report.rescan_findings:
            self.alerts.publish(
                "audit_rescan_match",
                {"events": [f["event_id"] for f in report.rescan_findings]},
            )

    def _rescan_payloads(self) -> list[dict]:
        """Match retained quarantine payloads against the current rules;
        report only rules the original verdict did not already name."""
        ruleset = self.registry.active
        findings = []
        for item in self.quarantine.list_items(status=None):
            texts = [m.get("content", "") for m in item.envelope.get("messages", [])]
            joint = JointText(texts)
            hits = {m.rule_id for m in match_rules(joint.text, ruleset, Direction.INPUT)}
            if item.suppressed_response:
                out_joint = JointText([m.get("content", "") for m in item.suppressed_response])
                hits |= {m.rule_id for m in match_rules(out_joint.text, ruleset, Direction.OUTPUT)}
            new = sorted(hits - set(item.matched_rule_ids))
            if new:
                findings.append({"event_id": item.event_id, "rule_ids": new})
        return findings

    def _security_audit_job(self, report: AuditReport) -> None:
        self._run_audit_into(report)

    def _bucket_eviction_job(self, report: AuditReport) -> None:
        self.buckets.evict_stale(time.monotonic())

    # -- scheduling ----------------------------------------------------------

    def run_tick(self) -> AuditReport:
        """One scheduler tick: run every registered job, skipping any whose
        previous run is still in progress."""
        report = AuditReport(run_id=str(uuid.uuid4()), started_at=rfc3339_now())
        for name, job in self._jobs.items():
            lock = self._job_locks[name]
            if not lock.acquire(blocking=False):
                continue
            try:
                job(report)
                report.jobs_run.append(name)
            except Exception as exc:
                report.failures.append(f"{name}: {exc}")
            finally:
                lock.release()
        self._append_report(report)
        return report

    def _append_report(self, report: AuditReport) -> None:
        report.finished_at = rfc3339_now()
        audit = report.to_audit_dict()
        try:
            self.event_log.append(
                client_id="_audit",
                envelope_digest=digest_obj(audit),
                input_verdict={
                    "decision": "allow",
                    "score": format_score(0.0),
                    "matched_rules": [],
                },
                final_decision="allow",
                latency_ms=0,
                reason="audit",
                audit=audit,
            )
        except Exception as exc:
            report.failures.append(f"report_append: {exc}")

    def start(self, interval_s: int) -> None:
        if interval_s < 1:
            raise ValueError("interval_s must be >= 1")
        self._stop.clear()

        def loop():
            while not self._stop.wait(interval_s):
                threading.Thread(target=self.run_tick, daemon=True).start()

        self._thread = threading.Thread(target=loop, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=5)
            self._thread = None
