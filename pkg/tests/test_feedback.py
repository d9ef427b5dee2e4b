import json
import random

import pytest

from agentfw.auth import Principal
from agentfw.errors import Forbidden, UnknownRule
from agentfw.feedback import FeedbackService, next_weight
from agentfw.rules import RuleAction, RuleRegistry


def operator(role="operator"):
    return Principal(key_id=f"{role}-1", role=role, key_hash="0" * 64, created_at=0.0)


def rule_doc(weight=0.8, action="score"):
    return json.dumps(
        {
            "rules": [
                {
                    "id": "R-1",
                    "category": "policy",
                    "pattern_type": "substring",
                    "pattern": "needle",
                    "weight": weight,
                    "action": action,
                    "applies_to": "input",
                }
            ]
        }
    )


def make_service(weight=0.8, action="score", alpha=0.2):
    registry = RuleRegistry()
    registry.load_and_swap(rule_doc(weight, action))
    return FeedbackService(registry, alpha=alpha)


def test_fp_decays_toward_zero():
    service = make_service(weight=0.8)
    record = service.apply_feedback("R-1", "fp", operator())
    assert record.weight_before == pytest.approx(0.8)
    assert record.weight_after == pytest.approx(0.64, abs=1e-12)


def test_two_fp_reach_0_512():
    service = make_service(weight=0.8)
    service.apply_feedback("R-1", "fp", operator())
    record = service.apply_feedback("R-1", "fp", operator())
    assert record.weight_after == pytest.approx(0.512, abs=1e-9)
    # below the default quarantine threshold: the rule alone no longer holds traffic
    assert record.weight_after < 0.6


def test_tp_moves_toward_one():
    service = make_service(weight=0.5)
    record = service.apply_feedback("R-1", "tp", operator())
    assert record.weight_after == pytest.approx(0.6, abs=1e-12)


def test_mixed_labels_sequence():
    service = make_service(weight=0.5)
    service.apply_feedback("R-1", "tp", operator())
    record = service.apply_feedback("R-1", "fp", operator())
    assert record.weight_after == pytest.approx(0.48, abs=1e-12)


def test_each_feedback_bumps_ruleset_version():
    service = make_service()
    v0 = service.registry.active.version
    service.apply_feedback("R-1", "fp", operator())
    service.apply_feedback("R-1", "tp", operator())
    assert service.registry.active.version == v0 + 2


def test_weights_stay_clamped_over_random_streams():
    rng = random.Random(13)
    for start in (0.05, 0.5, 0.99):
        service = make_service(weight=start)
        for _ in range(200):
            record = service.apply_feedback("R-1", rng.choice(["tp", "fp"]), operator())
            assert 0.05 <= record.weight_after <= 0.99


def test_update_is_contraction_toward_target():
    rng = random.Random(21)
    for _ in range(500):
        w = rng.uniform(0.05, 0.99)
        label = rng.choice(["tp", "fp"])
        target = 1.0 if label == "tp" else 0.0
        w_next = next_weight(w, label)
        if 0.05 <= w + 0.2 * (target - w) <= 0.99:  # clamp inactive
            assert abs(w_next - target) == pytest.approx(0.8 * abs(w - target), abs=1e-12)


def test_k_consecutive_fp_to_leave_quarantine_band():
    # smallest k with 0.8 * 0.8^k < 0.6 is k = 2
    service = make_service(weight=0.8)
    service.apply_feedback("R-1", "fp", operator())
    assert service.registry.active.by_id("R-1").weight >= 0.6
    service.apply_feedback("R-1", "fp", operator())
    assert service.registry.active.by_id("R-1").weight < 0.6


def test_action_never_flips_automatically():
    service = make_service(weight=0.8, action="hard_block")
    for _ in range(10):
        service.apply_feedback("R-1", "fp", operator())
    rule = service.registry.active.by_id("R-1")
    assert rule.action is RuleAction.HARD_BLOCK
    assert rule.weight == pytest.approx(0.8 * 0.8**10, abs=1e-9)


def test_unknown_rule_and_forbidden():
    service = make_service()
    with pytest.raises(UnknownRule):
        service.apply_feedback("NOPE", "fp", operator())
    with pytest.raises(Forbidden):
        service.apply_feedback("R-1", "fp", operator(role="client"))


def test_reward_summary_counts_and_weight():
    service = make_service(weight=0.8)
    assert service.reward_summary() == {}
    service.apply_feedback("R-1", "fp", operator())
    service.apply_feedback("R-1", "fp", operator())
    summary = service.reward_summary()
    assert summary["R-1"]["fp_count"] == 2
    assert summary["R-1"]["tp_count"] == 0
    assert summary["R-1"]["current_weight"] == pytest.approx(0.512, abs=1e-9)


def test_feedback_log_persisted(tmp_path):
    registry = RuleRegistry()
    registry.load_and_swap(rule_doc())
    service = FeedbackService(registry, log_path=tmp_path / "feedback.jsonl")
    service.apply_feedback("R-1", "tp", operator(), event_id="ev-7")
    lines = (tmp_path / "feedback.jsonl").read_text().splitlines()
    entry = json.loads(lines[0])
    assert entry["event_id"] == "ev-7"
    assert entry["label"] == "tp"
