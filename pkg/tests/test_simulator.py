import time

import httpx
import pytest

from agentfw.simulator import TEST_PAN, UpstreamSimulator


def post(sim, messages):
    return httpx.post(sim.base_url, json={"messages": messages, "metadata": {}}, timeout=5.0)


def test_echo_returns_last_user_message(sim_factory):
    sim = sim_factory(mode="echo")
    r = post(sim, [{"role": "user", "content": "hi"}])
    assert r.status_code == 200
    assert r.json()["messages"] == [{"role": "assistant", "content": "hi"}]


def test_echo_uses_last_user_turn(sim_factory):
    sim = sim_factory(mode="echo")
    r = post(
        sim,
        [
            {"role": "user", "content": "first"},
            {"role": "assistant", "content": "mid"},
            {"role": "user", "content": "second"},
        ],
    )
    assert r.json()["messages"][0]["content"] == "second"


def test_leak_canary_appends_token(sim_factory):
    sim = sim_factory(mode="leak_canary", canary_value="CANARY-xyz-123456")
    r = post(sim, [{"role": "user", "content": "hello"}])
    assert "CANARY-xyz-123456" in r.json()["messages"][0]["content"]


def test_emit_pii_appends_card(sim_factory):
    sim = sim_factory(mode="emit_pii")
    r = post(sim, [{"role": "user", "content": "pay me"}])
    assert TEST_PAN in r.json()["messages"][0]["content"]


def test_delay_mode_sleeps(sim_factory):
    sim = sim_factory(mode="delay", delay_ms=300)
    start = time.monotonic()
    post(sim, [{"role": "user", "content": "slow"}])
    assert time.monotonic() - start >= 0.3


def test_error_mode_returns_status(sim_factory):
    sim = sim_factory(mode="error", error_status=503)
    r = post(sim, [{"role": "user", "content": "x"}])
    assert r.status_code == 503


def test_recorder_counts_every_request(sim_factory):
    sim = sim_factory(mode="echo")
    for i in range(3):
        post(sim, [{"role": "user", "content": f"m{i}"}])
    assert sim.request_count == 3
    assert sim.recorder[0]["messages"][0]["content"] == "m0"


def test_invalid_mode_rejected():
    with pytest.raises(ValueError):
        UpstreamSimulator(mode="chaos")
