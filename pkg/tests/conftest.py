from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from agentfw.config import FirewallConfig
from agentfw.envelope import Message, RequestEnvelope
from agentfw.server import FirewallApp, create_app
from agentfw.simulator import UpstreamSimulator

CORPUS_DIR = Path(__file__).parent / "corpus"

BOOTSTRAP_SECRET = "test-bootstrap-admin-secret-0123456789abcdef"


def load_corpus(name: str) -> list[str]:
    return json.loads((CORPUS_DIR / name).read_text(encoding="utf-8"))


def make_envelope(
    *texts: str, role: str = "user", upstream: str = "sim", client_id: str = "client-1"
) -> RequestEnvelope:
    messages = tuple(Message(role, t) for t in texts)
    return RequestEnvelope(
        envelope_id=f"env-{abs(hash(texts)) % 10**8}",
        client_id=client_id,
        received_at="2026-01-01T00:00:00.000000Z",
        upstream_name=upstream,
        messages=messages,
    )


@dataclass
class Harness:
    client: TestClient
    fw: FirewallApp
    keys: dict[str, str]
    sim: UpstreamSimulator | None = None

    def headers(self, role: str = "client") -> dict:
        return {"X-API-Key": self.keys[role]}

    def chat(self, text: str, upstream: str = "sim", role: str = "client", **extra):
        body = {
            "upstream": upstream,
            "messages": [{"role": "user", "content": text}],
            "metadata": {},
        }
        body.update(extra)
        return self.client.post("/v1/guard/chat", json=body, headers=self.headers(role))


@pytest.fixture
def sim_factory():
    sims: list[UpstreamSimulator] = []

    def make(**kwargs) -> UpstreamSimulator:
        sim = UpstreamSimulator(**kwargs).start()
        sims.append(sim)
        return sim

    yield make
    for sim in sims:
        sim.stop()


@pytest.fixture
def app_factory(tmp_path, sim_factory, monkeypatch):
    monkeypatch.setenv("FW_BOOTSTRAP_ADMIN_KEY", BOOTSTRAP_SECRET)
    harnesses: list[Harness] = []

    def make(
        sim_mode: str = "echo",
        sim: UpstreamSimulator | None = None,
        with_sim: bool = True,
        config_overrides: dict | None = None,
        canaries: list[str] | None = None,
        **sim_kwargs,
    ) -> Harness:
        if sim is None and with_sim:
            sim = sim_factory(mode=sim_mode, **sim_kwargs)
        data = {
            "max_body_bytes": 1_048_576,
            "max_inflight": 64,
            "rate_limits": {"default": {"capacity": 1000, "refill_per_s": 1000.0}},
            "upstreams": (
                [
                    {
                        "name": "sim",
                        "base_url": sim.base_url,
                        "timeout_ms": 3000,
                        "canary_tokens": canaries or [],
                    }
                ]
                if sim
                else []
            ),
            "rules_file": "rules.json",
            "key_file": "keys.json",
            "event_log": "events.log",
            "quarantine_store": "quarantine.json",
            "audit_interval_s": 0,
        }
        data.update(config_overrides or {})
        workdir = tmp_path / f"fw{len(harnesses)}"
        workdir.mkdir()
        config = FirewallConfig.from_dict(data, base_dir=workdir)
        app = create_app(config)
        client = TestClient(app)
        keys = {"admin": BOOTSTRAP_SECRET}
        for role in ("operator", "client"):
            r = client.post(
                "/admin/keys", json={"role": role}, headers={"X-API-Key": BOOTSTRAP_SECRET}
            )
            assert r.status_code == 200, r.text
            keys[role] = r.json()["secret"]
        harness = Harness(client=client, fw=app.state.fw, keys=keys, sim=sim)
        harnesses.append(harness)
        return harness

    yield make
    for h in harnesses:
        h.fw.stop_background()


@pytest.fixture
def harness(app_factory) -> Harness:
    return app_factory()
