"""HTTP surface: the guarded chat endpoint plus the admin API.

Every route, /metrics included, sits behind X-API-Key authentication and the
role matrix; interactive docs are disabled so no unauthenticated surface
exists.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import threading
from contextlib import asynccontextmanager

import uvicorn
from fastapi import Depends, FastAPI, HTTPException, Request, Response

from .auditor import Auditor
from .auth import KeyStore, Principal, authorize
from .config import FirewallConfig
from .envelope import RequestEnvelope
from .errors import (
    AlreadyResolved,
    Forbidden,
    NotFound,
    ParseError,
    Revoked,
    StaleVersion,
    Unauthenticated,
    UnknownRule,
    ValidationError,
)
from .eventlog import EventLog, QuarantineQueue
from .feedback import FeedbackService
from .metrics import AlertHub, MetricsHub
from .pipeline import GatewayPipeline
from .rules import Decision, RuleRegistry


def starter_rules_document() -> bytes:
    return importlib.resources.files("agentfw.data").joinpath("starter_rules.json").read_bytes()


class FirewallApp:
    """Owns every service instance behind one server process."""

    def __init__(self, config: FirewallConfig):
        self.config = config
        self.registry = RuleRegistry()
        self._load_initial_rules()
        self.keys = KeyStore(config.key_file)
        self.keys.bootstrap_admin()
        self.alerts = AlertHub(config.alert_sink_mode, config.alert_sink_target)
        self.metrics = MetricsHub(alerts=self.alerts)
        self.event_log = EventLog(config.event_log)
        self.quarantine = QuarantineQueue(config.quarantine_store)
        self.feedback = FeedbackService(
            self.registry, alpha=config.feedback_alpha, log_path=config.feedback_log
        )
        self.pipeline = GatewayPipeline(
            config=config,
            registry=self.registry,
            event_log=self.event_log,
            quarantine=self.quarantine,
            metrics=self.metrics,
            alerts=self.alerts,
            feedback=self.feedback,
        )
        self.auditor = Auditor(
            self.event_log,
            self.quarantine,
            self.registry,
            self.alerts,
            buckets=self.pipeline.buckets,
        )
        self._ticker_stop = threading.Event()
        self._ticker: threading.Thread | None = None

    def _load_initial_rules(self) -> None:
        path = self.config.rules_file
        if path and os.path.exists(path):
            document = open(path, "rb").read()
        else:
            document = starter_rules_document()
            if path:
                with open(path, "wb") as fh:
                    fh.write(document)  # seed a fresh deployment
        self.registry.load_and_swap(document)

    def start_background(self) -> None:
        if self.config.audit_interval_s > 0:
            self.auditor.start(self.config.audit_interval_s)
        self._ticker_stop.clear()

        def tick():
            while not self._ticker_stop.wait(60.0):
                self.metrics.flush_minute()

        self._ticker = threading.Thread(target=tick, daemon=True)
        self._ticker.start()

    def stop_background(self) -> None:
        self.auditor.stop()
        self._ticker_stop.set()
        if self._ticker:
            self._ticker.join(timeout=5)
            self._ticker = None
        self.pipeline.close()


def _rule_to_dict(rule) -> dict:
    return {
        "id": rule.id,
        "category": rule.category,
        "pattern_type": rule.pattern_type,
        "pattern": rule.pattern,
        "weight": rule.weight,
        "action": rule.action.value,
        "applies_to": rule.applies_to,
        "description": rule.description,
    }


def create_app(config: FirewallConfig, start_background: bool = False) -> FastAPI:
    fw = FirewallApp(config)

    lifespan = None
    if start_background:

        @asynccontextmanager
        async def lifespan(app: FastAPI):
            fw.start_background()
            try:
                yield
            finally:
                fw.stop_background()

    app = FastAPI(docs_url=None, redoc_url=None, openapi_url=None, lifespan=lifespan)
    app.state.fw = fw

    def require_access(request: Request) -> Principal:
        try:
            principal = fw.keys.authenticate(request.headers.get("X-API-Key"))
            authorize(principal, request.method, request.url.path)
        except (Unauthenticated, Revoked) as exc:
            raise HTTPException(status_code=401, detail=str(exc))
        except Forbidden as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        return principal

    auth = Depends(require_access)

    # -- the guarded chat endpoint ------------------------------------------

    @app.post("/v1/guard/chat")
    def guard_chat(request: Request, body: dict, response: Response, principal: Principal = auth):
        try:
            envelope = RequestEnvelope.from_wire(body, client_id=principal.key_id)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        outcome = fw.pipeline.handle_exchange(envelope, principal.key_id)

        decisive = outcome.input_verdict
        if (
            outcome.output_verdict is not None
            and outcome.output_verdict.decision is outcome.decision
            and outcome.decision is not outcome.input_verdict.decision
        ):
            decisive = outcome.output_verdict

        payload = {
            "decision": outcome.decision.value,
            "score": decisive.score,
            "matched_rules": decisive.matched_rule_ids,
            "event_id": outcome.event_id,
            "upstream_response": (
                [m.to_dict() for m in outcome.upstream_response]
                if outcome.upstream_response is not None
                else None
            ),
            "reason": outcome.reason,
        }
        if outcome.reason in ("rate_limited", "concurrency_saturated"):
            response.status_code = 429
            response.headers["Retry-After"] = str(
                fw.pipeline.buckets.retry_after_s(principal.key_id)
            )
        elif outcome.reason == "payload_too_large":
            response.status_code = 413
        elif outcome.decision is Decision.BLOCK:
            response.status_code = 403
        elif outcome.decision is Decision.QUARANTINE:
            response.status_code = 202
        else:
            response.status_code = 200
        return payload

    # -- rules ---------------------------------------------------------------

    @app.get("/admin/rules")
    def get_rules(principal: Principal = auth):
        active = fw.registry.active
        return {
            "version": active.version,
            "loaded_at": active.loaded_at,
            "rules": [_rule_to_dict(r) for r in active.rules],
        }

    @app.put("/admin/rules")
    def put_rules(body: dict, principal: Principal = auth):
        document = json.dumps(body)
        try:
            new_set = fw.registry.load_and_swap(document)
        except (ParseError, ValidationError, StaleVersion) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if fw.config.rules_file:
            with open(fw.config.rules_file, "w", encoding="utf-8") as fh:
                fh.write(document)
        return {"version": new_set.version, "rules": len(new_set.rules)}

    @app.post("/admin/rules/reload")
    def reload_rules(principal: Principal = auth):
        path = fw.config.rules_file
        if not path or not os.path.exists(path):
            raise HTTPException(status_code=400, detail="no rules file configured")
        try:
            new_set = fw.registry.load_and_swap(open(path, "rb").read())
        except (ParseError, ValidationError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"version": new_set.version, "rules": len(new_set.rules)}

    # -- events / quarantine --------------------------------------------------

    @app.get("/admin/events")
    def get_events(
        since_seq: int = 0,
        client_id: str | None = None,
        decision: str | None = None,
        limit: int = 100,
        principal: Principal = auth,
    ):
        events = fw.event_log.query_events(
            since_seq=since_seq, client_id=client_id, decision=decision, limit=limit
        )
        return {"events": events, "tip_seq": fw.event_log.tip_seq}

    @app.get("/admin/quarantine")
    def get_quarantine(status: str | None = "pending", principal: Principal = auth):
        if status == "all":
            status = None
        return {"items": [i.to_dict() for i in fw.quarantine.list_items(status=status)]}

    @app.post("/admin/quarantine/{event_id}/resolve")
    def resolve_quarantine(event_id: str, body: dict, principal: Principal = auth):
        action = body.get("action")
        label = body.get("label")
        try:
            return fw.pipeline.resolve_quarantine(event_id, action, label, principal)
        except NotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except AlreadyResolved as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except Forbidden as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    # -- feedback / rewards ----------------------------------------------------

    @app.post("/admin/feedback")
    def post_feedback(body: dict, principal: Principal = auth):
        try:
            record = fw.feedback.apply_feedback(
                rule_id=body.get("rule_id", ""),
                label=body.get("label", ""),
                operator=principal,
                event_id=body.get("event_id", ""),
            )
        except UnknownRule as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except Forbidden as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return record.to_dict()

    @app.get("/admin/rewards")
    def get_rewards(window_s: float | None = None, principal: Principal = auth):
        return {"rules": fw.feedback.reward_summary(window_s)}

    # -- audit / alerts / metrics ------------------------------------------------

    @app.post("/admin/audit/run")
    def run_audit(principal: Principal = auth):
        report = fw.auditor.audit_once()
        return report.to_audit_dict()

    @app.get("/admin/alerts")
    def get_alerts(since_id: int = 0, principal: Principal = auth):
        return {"alerts": [a.to_dict() for a in fw.alerts.feed(since_id)]}

    @app.get("/metrics")
    def get_metrics(principal: Principal = auth):
        return fw.metrics.snapshot()

    # -- keys ----------------------------------------------------------------------

    @app.post("/admin/keys")
    def issue_key(body: dict, principal: Principal = auth):
        role = body.get("role", "client")
        try:
            key_id, secret = fw.keys.issue_key(role, issuer=principal)
        except Forbidden as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"key_id": key_id, "secret": secret, "role": role}

    @app.delete("/admin/keys/{key_id}")
    def revoke_key(key_id: str, principal: Principal = auth):
        try:
            fw.keys.revoke(key_id, issuer=principal)
        except Forbidden as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown key {key_id}")
        return {"revoked": key_id}

    @app.get("/admin/keys")
    def list_keys(principal: Principal = auth):
        return {"keys": fw.keys.list_keys()}

    return app


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="GenAI traffic firewall gateway")
    parser.add_argument("--config", required=True, help="path to the JSON config file")
    args = parser.parse_args(argv)
    config = FirewallConfig.load(args.config)
    app = create_app(config, start_background=True)
    host, _, port = config.listen_addr.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8800), log_level="warning")


if __name__ == "__main__":
    main()
