import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dichoptic.session import (
    EXP1_KINDS,
    EXP2_KINDS,
    Block,
    ChecksumError,
    Event,
    ProtocolError,
    QuestionnaireRecord,
    ResponseRecord,
    Session,
    SessionPlan,
    build_default_plan,
    export_session,
    load_session,
    replay_events,
    run_scripted_session,
)


def trial_blocks(plan):
    return [b for b in plan.blocks if b.kind == "trial_block"]


def start_first_trial(plan):
    """Fresh session advanced to the first crosshair."""
    session = Session(plan)
    session.advance(Event("tick", 0.0))  # briefing
    session.advance(Event("ui_ready", 1000.0))
    assert session.phase == "crosshair"
    return session


class TestDefaultPlan:
    def test_trial_counts(self):
        plan = build_default_plan("p1", seed=7)
        scored = sum(len(b.scenes) for b in plan.blocks if b.kind == "trial_block")
        training = sum(len(b.scenes) for b in plan.blocks if b.kind == "training")
        assert scored == 288
        assert training == 120

    def test_block_structure(self):
        plan = build_default_plan("p1", seed=7, scenes_per_set=8, training_scenes=4)
        kinds = [b.set_kind for b in trial_blocks(plan)]
        assert kinds[:3] == list(EXP1_KINDS)
        assert sorted(kinds[3:]) == sorted(EXP2_KINDS)
        labels = [b.label for b in plan.blocks if b.kind == "questionnaire"]
        assert labels == ["after_exp1", "after_exp2"]
        pauses = [b for b in plan.blocks if b.kind == "pause"]
        assert len(pauses) == 5
        assert all(b.duration_s == 30.0 for b in pauses)

    def test_same_seed_same_plan(self):
        a = build_default_plan("p1", seed=3, scenes_per_set=8, training_scenes=4)
        b = build_default_plan("p1", seed=3, scenes_per_set=8, training_scenes=4)
        assert a.echo() == b.echo()
        assert [s.scene_id for blk in a.blocks for s in blk.scenes] == [
            s.scene_id for blk in b.blocks for s in blk.scenes
        ]

    def test_seed_shuffles_only_second_half(self):
        orders = set()
        for seed in range(6):
            plan = build_default_plan("p1", seed=seed, scenes_per_set=4, training_scenes=2)
            kinds = tuple(b.set_kind for b in trial_blocks(plan))
            assert kinds[:3] == EXP1_KINDS
            orders.add(kinds[3:])
        assert len(orders) > 1  # the heterogeneous half does get permuted

    def test_training_must_precede_scored(self, small_plan):
        scored = next(b for b in small_plan.blocks if b.kind == "trial_block")
        with pytest.raises(ValueError, match="training"):
            SessionPlan(participant_id="x", rng_seed=0, blocks=(scored,))

    def test_disjoint_scene_pools(self, small_plan):
        ids = [s.scene_id for b in small_plan.blocks for s in b.scenes]
        assert len(ids) == len(set(ids))


class TestTrialTiming:
    def test_crosshair_holds_until_2500(self, small_plan):
        session = start_first_trial(small_plan)
        start = session.phase_deadline - 2500.0
        session.advance(Event("tick", start + 2499.0))
        assert session.phase == "crosshair"
        effects = session.advance(Event("tick", start + 2500.0))
        assert session.phase == "stimulus"
        assert effects[0]["type"] == "present_scene"
        assert effects[0]["exposure_ms"] == 250.0

    def test_stimulus_expires_into_response_phase(self, small_plan):
        session = start_first_trial(small_plan)
        session.advance(Event("tick", session.phase_deadline))
        onset = session.phase_deadline - 250.0
        session.advance(Event("tick", onset + 249.0))
        assert session.phase == "stimulus"
        effects = session.advance(Event("tick", onset + 250.0))
        assert session.phase == "awaiting_response"
        assert {e["type"] for e in effects} >= {"hide_scene", "prompt_response"}

    def test_early_response_during_stimulus(self, small_plan):
        session = start_first_trial(small_plan)
        session.advance(Event("tick", session.phase_deadline))
        onset = session.phase_deadline - 250.0
        scene = session.current_scene
        session.advance(Event("response", onset + 120.0, answer=scene.target_present))
        assert session.phase == "stimulus"  # exposure continues
        record = session.log.responses[-1]
        assert record.response_latency_ms == pytest.approx(120.0)
        session.advance(Event("tick", onset + 250.0))
        assert session.phase == "crosshair"  # straight to the next trial

    def test_response_after_exposure_latency(self, small_plan):
        session = start_first_trial(small_plan)
        session.advance(Event("tick", session.phase_deadline))
        onset = session.phase_deadline - 250.0
        session.advance(Event("tick", onset + 250.0))
        scene = session.current_scene
        session.advance(Event("response", onset + 480.0, answer=not scene.target_present))
        record = session.log.responses[-1]
        assert record.response_latency_ms == pytest.approx(480.0)
        assert record.correct is False


class TestResponses:
    def test_training_feedback_flags_wrong_answer(self, small_plan):
        session = start_first_trial(small_plan)
        assert session.current_block.kind == "training"
        session.advance(Event("tick", session.phase_deadline))
        scene = session.current_scene
        effects = session.advance(
            Event("response", session.phase_deadline + 100.0, answer=not scene.target_present)
        )
        feedback = [e for e in effects if e["type"] == "feedback"]
        assert feedback and feedback[0]["correct"] is False

    def test_scored_blocks_have_no_feedback(self, perfect_session):
        fb_entries = [
            e
            for e in perfect_session.log.entries
            if e.get("type") == "phase" and e.get("phase") == "feedback"
        ]
        training_blocks = {
            i for i, b in enumerate(perfect_session.plan.blocks) if b.kind == "training"
        }
        assert fb_entries
        assert all(e["block"] in training_blocks for e in fb_entries)

    def test_yes_on_nontarget_is_false_positive(self, small_plan):
        session = start_first_trial(small_plan)
        while True:
            session.advance(Event("tick", session.phase_deadline))  # stimulus
            scene = session.current_scene
            t = session.phase_deadline
            session.advance(Event("tick", t))
            if not scene.target_present:
                session.advance(Event("response", t + 50.0, answer=True))
                break
            session.advance(Event("response", t + 50.0, answer=scene.target_present))
        record = session.log.responses[-1]
        assert record.answer is True and record.target_present is False
        assert record.correct is False

    def test_response_outside_trial_is_protocol_error(self, small_plan):
        session = Session(small_plan)
        session.advance(Event("tick", 0.0))
        phase_before = session.phase
        entries_before = len(session.log.entries)
        with pytest.raises(ProtocolError, match="response"):
            session.advance(Event("response", 1.0, answer=True))
        assert session.phase == phase_before
        assert len(session.log.entries) == entries_before
        session.advance(Event("ui_ready", 2.0))  # still usable
        assert session.phase == "crosshair"

    def test_clock_must_be_monotone(self, small_plan):
        session = Session(small_plan)
        session.advance(Event("tick", 100.0))
        with pytest.raises(ProtocolError, match="clock"):
            session.advance(Event("tick", 99.0))


class TestQuestionnaires:
    def test_tlx_must_be_multiples_of_five(self):
        scores = {k: 50 for k in ("mental_demand", "physical_demand", "temporal_demand",
                                   "performance", "effort", "frustration")}
        scores["effort"] = 47
        with pytest.raises(ValueError, match="steps of 5"):
            QuestionnaireRecord(kind="nasa_tlx", block_label="after_exp1", tlx=scores)

    def test_custom_range(self):
        with pytest.raises(ValueError, match="0-6"):
            QuestionnaireRecord(kind="custom", block_label="after_exp1",
                                clearness=7, decision_making=3)

    def test_submission_in_wrong_block_rejected(self, small_plan):
        session = Session(small_plan)
        session.advance(Event("tick", 0.0))
        record = QuestionnaireRecord(kind="custom", block_label="after_exp1",
                                     clearness=3, decision_making=3)
        with pytest.raises(ProtocolError):
            session.advance(Event("questionnaire_submitted", 1.0, record=record))

    def test_correct_invariant_enforced(self):
        with pytest.raises(ValueError, match="correct"):
            ResponseRecord(
                scene_id="s", set_kind="exp1_4", training=False, block_index=1,
                answer=True, target_present=True, correct=False,
                response_latency_ms=300.0, timestamp_ms=1.0,
            )


class TestExport:
    def test_empty_session_is_header_only(self, small_plan):
        text = export_session(Session(small_plan).log)
        lines = text.strip().splitlines()
        assert len(lines) == 1
        header = json.loads(lines[0])
        assert header["type"] == "header" and "checksum" in header

    def test_round_trip(self, perfect_session, tmp_path):
        path = tmp_path / "session.jsonl"
        export_session(perfect_session.log, path)
        loaded = load_session(path)
        assert loaded.participant_id == perfect_session.log.participant_id
        assert loaded.entries == perfect_session.log.entries
        assert [r.to_dict() for r in loaded.responses] == [
            r.to_dict() for r in perfect_session.log.responses
        ]

    def test_single_byte_mutation_detected(self, perfect_session, tmp_path):
        path = tmp_path / "session.jsonl"
        text = export_session(perfect_session.log, path)
        # flip one digit inside a record line
        target = text.index('"latency_ms"')
        digit = text.index(":", target) + 2
        mutated = text[:digit] + ("7" if text[digit] != "7" else "8") + text[digit + 1 :]
        assert mutated != text
        with pytest.raises(ChecksumError):
            load_session(mutated)

    def test_header_mutation_detected(self, perfect_session):
        text = export_session(perfect_session.log)
        mutated = text.replace('"p-small"', '"p-smallX"', 1)
        with pytest.raises(ChecksumError):
            load_session(mutated)


class TestScriptedRuns:
    def test_perfect_responder_all_correct(self, perfect_session):
        records = perfect_session.log.responses
        expected = sum(
            len(b.scenes) for b in perfect_session.plan.blocks if b.kind in ("training", "trial_block")
        )
        assert len(records) == expected
        assert all(r.correct for r in records)
        assert perfect_session.complete

    def test_replay_reproduces_log_bit_exactly(self, small_plan, perfect_session):
        events = perfect_session.log.events
        replayed = replay_events(small_plan, events)
        assert export_session(replayed.log) == export_session(perfect_session.log)

    def test_always_no_misses_all_targets(self, small_plan):
        session = run_scripted_session(small_plan, responder="always_no")
        scored = [r for r in session.log.responses if not r.training]
        assert all(not r.answer for r in scored)
        by_kind = {}
        for r in scored:
            by_kind.setdefault(r.set_kind, []).append(r.correct)
        for kind, vals in by_kind.items():
            assert sum(vals) / len(vals) == 0.5  # half the trials have no target

    @settings(max_examples=12, deadline=None)
    @given(quantum=st.floats(min_value=5.0, max_value=400.0))
    def test_stimulus_never_exceeds_exposure_by_more_than_one_tick(self, quantum):
        plan = build_default_plan("p-t", seed=2, scenes_per_set=4, training_scenes=2)
        session = Session(plan)
        t = 0.0
        onsets = {}
        durations = []
        guard = 0
        while not session.complete and guard < 20000:
            guard += 1
            phase_before = session.phase
            if phase_before == "briefing":
                session.advance(Event("ui_ready", t))
            elif phase_before == "questionnaire":
                session.advance(Event("ui_ready", t))
            elif phase_before in ("awaiting_response",):
                session.advance(Event("response", t, answer=True))
            else:
                session.advance(Event("tick", t))
            if session.phase == "stimulus" and phase_before != "stimulus":
                onsets[id(session)] = t
            if phase_before == "stimulus" and session.phase != "stimulus":
                durations.append(t - onsets[id(session)])
            t += quantum
        assert durations
        exposure = 250.0
        assert max(durations) <= exposure + quantum + 1e-9
