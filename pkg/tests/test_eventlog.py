import hashlib
import json
import random

import pytest

from agentfw.canonical import GENESIS_HASH, canonical_bytes
from agentfw.errors import AlreadyResolved, Forbidden, NotFound, RangeError
from agentfw.eventlog import (
    EventLog,
    QuarantineItem,
    QuarantineQueue,
    record_hash,
    verdict_summary,
)
from agentfw.rules import Decision, Direction, Verdict


def make_log(tmp_path, n=0, name="events.log"):
    log = EventLog(tmp_path / name)
    for i in range(n):
        log.append(
            client_id=f"client-{i % 3}",
            envelope_digest=hashlib.sha256(f"payload-{i}".encode()).hexdigest(),
            input_verdict={"decision": "allow", "score": "0.0000", "matched_rules": []},
            final_decision="allow" if i % 4 else "block",
            latency_ms=i,
        )
    return log


def test_genesis_event_fields(tmp_path):
    log = make_log(tmp_path, 1)
    record = log.query_events()[0]
    assert record["seq"] == "0"
    assert record["prev_hash"] == GENESIS_HASH
    assert len(record["hash"]) == 64


def test_chain_links_prev_hash(tmp_path):
    log = make_log(tmp_path, 2)
    first, second = log.query_events()
    assert second["prev_hash"] == first["hash"]
    assert second["seq"] == "1"


def test_stored_hash_recomputable_from_fields(tmp_path):
    """Independent SHA-256 recomputation outside the implementation."""
    log = make_log(tmp_path, 5)
    for line in (tmp_path / "events.log").read_text().splitlines():
        record = json.loads(line)
        body = {k: v for k, v in record.items() if k != "hash"}
        preimage = record["prev_hash"].encode() + b"\n" + json.dumps(
            body, sort_keys=True, separators=(",", ":"), ensure_ascii=False
        ).encode("utf-8")
        assert hashlib.sha256(preimage).hexdigest() == record["hash"]


def test_canonical_serialization_deterministic():
    record = {"b": "2", "a": "1", "nested": {"z": ["x", "y"], "a": "0"}}
    assert canonical_bytes(record) == canonical_bytes(json.loads(json.dumps(record)))
    assert record_hash(record, GENESIS_HASH) == record_hash(dict(reversed(record.items())), GENESIS_HASH)


def test_verify_clean_log(tmp_path):
    log = make_log(tmp_path, 100)
    assert log.verify_chain(0, 99) is None


def test_verify_detects_field_tamper(tmp_path):
    log = make_log(tmp_path, 100)
    path = tmp_path / "events.log"
    lines = path.read_text().splitlines()
    record = json.loads(lines[42])
    record["client_id"] = "someone-else"
    lines[42] = canonical_bytes(record).decode()
    path.write_text("\n".join(lines) + "\n")
    assert log.verify_chain(0, 99) == 42


def test_verify_detects_deleted_record(tmp_path):
    log = make_log(tmp_path, 100)
    path = tmp_path / "events.log"
    lines = path.read_text().splitlines()
    del lines[42]
    path.write_text("\n".join(lines) + "\n")
    assert log.verify_chain(0, 98) == 42


def test_verify_random_single_byte_mutations(tmp_path):
    log = make_log(tmp_path, 100)
    path = tmp_path / "events.log"
    pristine = path.read_bytes()
    line_starts = []
    offset = 0
    for line in pristine.split(b"\n")[:-1]:
        line_starts.append((offset, offset + len(line)))
        offset += len(line) + 1
    rng = random.Random(77)
    for _ in range(100):
        data = bytearray(pristine)
        pos = rng.randrange(len(data))
        original = data[pos]
        replacement = original
        while replacement == original:
            replacement = rng.randrange(32, 127)
        data[pos] = replacement
        path.write_bytes(bytes(data))
        expected_seq = next(
            (i for i, (s, e) in enumerate(line_starts) if s <= pos <= e), 99
        )
        assert log.verify_chain(0, 99) == expected_seq
    path.write_bytes(pristine)
    assert log.verify_chain(0, 99) is None


def test_verify_range_errors(tmp_path):
    log = make_log(tmp_path, 3)
    with pytest.raises(RangeError):
        log.verify_chain(0, 10)
    with pytest.raises(RangeError):
        log.verify_chain(-1, 2)
    with pytest.raises(RangeError):
        log.verify_chain(2, 1)


def test_query_filters(tmp_path):
    log = make_log(tmp_path, 12)
    assert len(log.query_events(since_seq=0, limit=10)) == 10
    blocks = log.query_events(decision="block")
    assert blocks and all(r["final_decision"] == "block" for r in blocks)
    assert log.query_events(client_id="nobody") == []
    one_client = log.query_events(client_id="client-1")
    assert one_client and all(r["client_id"] == "client-1" for r in one_client)
    seqs = [int(r["seq"]) for r in log.query_events(limit=1000)]
    assert seqs == sorted(seqs)


def test_recovery_resumes_chain(tmp_path):
    make_log(tmp_path, 3)
    reopened = EventLog(tmp_path / "events.log")
    assert reopened.tip_seq == 2
    record = reopened.append(
        client_id="late",
        envelope_digest="0" * 64,
        input_verdict={"decision": "allow", "score": "0.0000", "matched_rules": []},
        final_decision="allow",
        latency_ms=1,
    )
    assert record["seq"] == "3"
    assert reopened.verify_chain(0, 3) is None


def test_verdict_summary_formats_score():
    verdict = Verdict(
        decision=Decision.QUARANTINE, score=0.6499999, matches=(), direction=Direction.INPUT
    )
    summary = verdict_summary(verdict)
    assert summary == {"decision": "quarantine", "score": "0.6500", "matched_rules": []}


# -- quarantine queue -------------------------------------------------------------


def item(event_id="ev-1", kind="input"):
    return QuarantineItem(
        event_id=event_id,
        kind=kind,
        envelope={"messages": [{"role": "user", "content": "hold me"}]},
        matched_rule_ids=["R-1"],
    )


def test_resolve_transitions_once(tmp_path):
    queue = QuarantineQueue(tmp_path / "q.json")
    queue.enqueue(item())
    resolved = queue.resolve("ev-1", "release", "fp", "op-1", "operator")
    assert resolved.status == "released"
    assert resolved.label == "fp"
    with pytest.raises(AlreadyResolved):
        queue.resolve("ev-1", "block", "tp", "op-1", "operator")


def test_resolve_unknown_and_forbidden(tmp_path):
    queue = QuarantineQueue(tmp_path / "q.json")
    queue.enqueue(item())
    with pytest.raises(NotFound):
        queue.resolve("missing", "block", "tp", "op-1", "operator")
    with pytest.raises(Forbidden):
        queue.resolve("ev-1", "block", "tp", "someone", "client")


def test_queue_persistence_round_trip(tmp_path):
    queue = QuarantineQueue(tmp_path / "q.json")
    queue.enqueue(item())
    queue.resolve("ev-1", "block", "tp", "op-9", "admin")
    reloaded = QuarantineQueue(tmp_path / "q.json")
    got = reloaded.get("ev-1")
    assert got is not None
    assert got.status == "blocked"
    assert got.resolved_by == "op-9"


def test_list_items_filters_status(tmp_path):
    queue = QuarantineQueue()
    queue.enqueue(item("a"))
    queue.enqueue(item("b"))
    queue.resolve("a", "block", "tp", "op", "operator")
    assert [i.event_id for i in queue.list_items()] == ["b"]
    assert len(queue.list_items(status=None)) == 2
