"""Study plans, L1 pairing, session phase machine, and export."""

import numpy as np
import pytest

from bayesteach.errors import (
    DimensionMismatch,
    InsufficientCategory,
    OddCount,
    OutOfOrder,
    ValidationError,
)
from bayesteach.model import PRESENT, ProbMap
from bayesteach.study import (
    BLOCK_CERT_EXAMPLES,
    BLOCK_CERT_NO_EXAMPLES,
    BLOCK_PREDICTION,
    JUSTIFICATION_OPTIONS,
    Exporter,
    ResponseRecord,
    Session,
    SessionStore,
    build_study_plan,
    justification_bitmap,
    l1_distance,
    next_trial,
    pair_by_l1,
    record_response,
)
from bayesteach.teaching import CATEGORIES


def matching_cost_oracle(candidates):
    """Independent exhaustive minimum over all perfect matchings."""
    n = len(candidates)

    def pairings(idx):
        if not idx:
            yield []
            return
        a = idx[0]
        for k in range(1, len(idx)):
            b = idx[k]
            rest = idx[1:k] + idx[k + 1:]
            for tail in pairings(rest):
                yield [(a, b)] + tail

    best = float("inf")
    for pairing in pairings(tuple(range(n))):
        cost = sum(l1_distance(candidates[i][1], candidates[j][1])
                   for i, j in pairing)
        best = min(best, cost)
    return best


def plan_cost(candidates, pairs):
    by_id = {cid: m for cid, m in candidates}
    return sum(l1_distance(by_id[a], by_id[b]) for a, b in pairs)


class TestPairByL1:
    def test_two_candidates(self, rng):
        cands = [("a", ProbMap(rng.uniform(0, 1, (4, 4)))),
                 ("b", ProbMap(rng.uniform(0, 1, (4, 4))))]
        assert pair_by_l1(cands) == [("a", "b")]

    def test_two_tight_clusters(self, rng):
        base1 = rng.uniform(0, 1, (6, 6))
        base2 = rng.uniform(0, 1, (6, 6))
        jitter = lambda b: np.clip(b + rng.uniform(-0.01, 0.01, b.shape), 0, 1)
        cands = [("a", ProbMap(jitter(base1))), ("c", ProbMap(jitter(base2))),
                 ("b", ProbMap(jitter(base1))), ("d", ProbMap(jitter(base2)))]
        pairs = {frozenset(p) for p in pair_by_l1(cands)}
        assert pairs == {frozenset({"a", "b"}), frozenset({"c", "d"})}

    def test_matches_exhaustive_optimum(self, rng):
        for _ in range(10):
            cands = [(f"c{i}", ProbMap(rng.uniform(0, 1, (5, 5)))) for i in range(6)]
            pairs = pair_by_l1(cands)
            assert plan_cost(cands, pairs) == pytest.approx(
                matching_cost_oracle(cands), rel=1e-12)

    def test_odd_count_rejected(self, rng):
        cands = [(f"c{i}", ProbMap(rng.uniform(0, 1, (3, 3)))) for i in range(3)]
        with pytest.raises(OddCount):
            pair_by_l1(cands)

    def test_dimension_mismatch(self, rng):
        cands = [("a", ProbMap(rng.uniform(0, 1, (3, 3)))),
                 ("b", ProbMap(rng.uniform(0, 1, (4, 3))))]
        with pytest.raises(DimensionMismatch):
            pair_by_l1(cands)


class TestBuildStudyPlan:
    def test_counterbalanced_blocks(self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, _ = desk_bundles
        plan = build_study_plan(store, bundles, participant_seed=42)
        for block in (plan.prediction, plan.cert_examples, plan.cert_no_examples):
            assert len(block) == 8
            counts = {c: 0 for c in CATEGORIES}
            for trial in block:
                counts[trial.category] += 1
            assert all(v == 2 for v in counts.values())

    def test_certification_pairs_same_category_split_across_blocks(
            self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, _ = desk_bundles
        plan = build_study_plan(store, bundles, participant_seed=42)
        a_ids = {t.target.id for t in plan.cert_examples}
        b_ids = {t.target.id for t in plan.cert_no_examples}
        assert not (a_ids & b_ids)
        assert len(a_ids) == len(b_ids) == 8

    def test_seed_changes_order_not_targets(self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, _ = desk_bundles
        p1 = build_study_plan(store, bundles, participant_seed=1)
        p2 = build_study_plan(store, bundles, participant_seed=2)
        ids = lambda plan: {t.target.id for t in plan.trials()}
        assert ids(p1) == ids(p2)
        assert ([t.target.id for t in p1.trials()]
                != [t.target.id for t in p2.trials()])

    def test_deterministic_for_fixed_seed(self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, _ = desk_bundles
        p1 = build_study_plan(store, bundles, participant_seed=9)
        p2 = build_study_plan(store, bundles, participant_seed=9)
        assert [t.target.id for t in p1.trials()] == [t.target.id for t in p2.trials()]
        assert p1.block_order == p2.block_order

    def test_insufficient_category(self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, _ = desk_bundles
        fn_ids = [i.id for i in store.images if i.category == "fn" and i.id in bundles]
        crippled = {k: v for k, v in bundles.items() if k not in fn_ids[3:]}
        with pytest.raises(InsufficientCategory) as err:
            build_study_plan(store, crippled, participant_seed=1)
        assert err.value.category == "fn"
        assert err.value.needed == 6

    def test_example_order_is_fixed(self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, _ = desk_bundles
        plan = build_study_plan(store, bundles, participant_seed=3)
        for trial in plan.prediction + plan.cert_examples:
            assert tuple(e.role for e in trial.bundle.examples) == CATEGORIES


def scripted_session(session, assets_root, persist=None):
    """Drive a session through all trials; returns the submission log."""
    log = []
    while True:
        payload = next_trial(session, assets_root)
        if payload["done"]:
            break
        phase = payload["phase"]
        if phase == "diagnose":
            record = ResponseRecord(session_id=session.id,
                                    trial_id=payload["trial_id"],
                                    phase="diagnose", rating=80)
        elif phase == "predict":
            record = ResponseRecord(session_id=session.id,
                                    trial_id=payload["trial_id"],
                                    phase="predict", rating=30)
        else:
            record = ResponseRecord(session_id=session.id,
                                    trial_id=payload["trial_id"],
                                    phase="respond", certify=True, agree=False,
                                    justifications=("correct_answer", "other"),
                                    free_text="needs a second look")
        ack = record_response(session, record, persist=persist)
        log.append((payload, ack))
    return log


class TestSessionFlow:
    def test_full_session_arithmetic(self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, assets = desk_bundles
        plan = build_study_plan(store, bundles, participant_seed=7)
        session = Session(id="s1", plan=plan)
        log = scripted_session(session, assets)
        assert session.done
        assert len(session.records) == 8 * 2 + 16
        phases = [p["phase"] for p, _ in log]
        assert phases.count("diagnose") == 8
        assert phases.count("predict") == 8
        assert phases.count("respond") == 16

    def test_prediction_phase_payloads(self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, assets = desk_bundles
        plan = build_study_plan(store, bundles, participant_seed=7)
        session = Session(id="s1", plan=plan)
        first = next_trial(session, assets)
        assert first["block"] == BLOCK_PREDICTION
        assert first["phase"] == "diagnose"
        assert "examples" not in first
        assert "saliency_url" not in first["target"]
        assert "ai" not in first
        record_response(session, ResponseRecord(
            session_id="s1", trial_id=first["trial_id"], phase="diagnose", rating=77))
        second = next_trial(session, assets)
        assert second["trial_id"] == first["trial_id"]
        assert second["phase"] == "predict"
        assert second["diagnosis"] == 77   # reminder screen echoes the diagnosis
        roles = [e["role"] for e in second["examples"]]
        assert roles == list(CATEGORIES)
        for e in second["examples"]:
            assert "ground_truth" in e
            assert e["saliency_url"].startswith("/assets/")
        assert "ground_truth" not in second["target"]
        assert second["target"]["saliency_url"].startswith("/assets/")

    def test_feedback_rule(self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, assets = desk_bundles
        plan = build_study_plan(store, bundles, participant_seed=7)
        session = Session(id="s1", plan=plan)
        payload = next_trial(session, assets)
        trial = session.current_trial()
        record_response(session, ResponseRecord(
            session_id="s1", trial_id=payload["trial_id"], phase="diagnose", rating=60))
        ack = record_response(session, ResponseRecord(
            session_id="s1", trial_id=payload["trial_id"], phase="predict", rating=80))
        expected = trial.ai_label == PRESENT   # rating 80 predicts "present"
        assert ack["feedback"]["correct"] == expected

    def test_certification_payloads_differ_by_block(self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, assets = desk_bundles
        plan = build_study_plan(store, bundles, participant_seed=7)
        log = scripted_session(Session(id="s1", plan=plan), assets)
        by_block = {}
        for payload, _ in log:
            by_block.setdefault(payload["block"], []).append(payload)
        for payload in by_block[BLOCK_CERT_EXAMPLES]:
            assert payload["ai"]["label"] in ("present", "absent")
            assert len(payload["examples"]) == 4
            assert payload["target"]["saliency_url"].startswith("/assets/")
        for payload in by_block[BLOCK_CERT_NO_EXAMPLES]:
            assert payload["examples"] == []
            assert payload["target"]["saliency_url"].startswith("/assets/")

    def test_validation_errors(self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, assets = desk_bundles
        plan = build_study_plan(store, bundles, participant_seed=7)
        session = Session(id="s1", plan=plan)
        payload = next_trial(session, assets)
        tid = payload["trial_id"]
        for bad_rating in (50, -1, 101, 3.5, None):
            with pytest.raises(ValidationError):
                record_response(session, ResponseRecord(
                    session_id="s1", trial_id=tid, phase="diagnose",
                    rating=bad_rating))
        # phase mismatch
        with pytest.raises(OutOfOrder):
            record_response(session, ResponseRecord(
                session_id="s1", trial_id=tid, phase="predict", rating=80))
        # duplicate submission of the same phase
        record_response(session, ResponseRecord(
            session_id="s1", trial_id=tid, phase="diagnose", rating=80))
        with pytest.raises(OutOfOrder):
            record_response(session, ResponseRecord(
                session_id="s1", trial_id=tid, phase="diagnose", rating=80))

    def test_free_text_requirements(self, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, assets = desk_bundles
        plan = build_study_plan(store, bundles, participant_seed=7)
        session = Session(id="s1", plan=plan)
        # fast-forward to the first certification trial
        while not session.done and session.current_trial().block == BLOCK_PREDICTION:
            payload = next_trial(session, assets)
            record_response(session, ResponseRecord(
                session_id="s1", trial_id=payload["trial_id"],
                phase=payload["phase"], rating=80))
        payload = next_trial(session, assets)
        tid = payload["trial_id"]
        for justification in ("examples_informative", "not_certain", "other"):
            with pytest.raises(ValidationError):
                record_response(session, ResponseRecord(
                    session_id="s1", trial_id=tid, phase="respond", certify=True,
                    agree=True, justifications=(justification,), free_text="  "))
        # options 1-3 need no elaboration
        ack = record_response(session, ResponseRecord(
            session_id="s1", trial_id=tid, phase="respond", certify=True,
            agree=True, justifications=("correct_answer", "looked_right_place")))
        assert ack["ok"]


class TestExport:
    def test_empty_directory_gives_header_only(self, tmp_path):
        exporter = Exporter(tmp_path)
        csv_text = exporter.to_csv()
        assert csv_text.count("\n") == 1
        assert csv_text.startswith("session_id,")

    def test_completed_session_rows(self, tmp_path, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, assets = desk_bundles
        factory = lambda seed: build_study_plan(store, bundles, seed)
        sessions = SessionStore(tmp_path, factory)
        session = sessions.create(seed=55)
        scripted_session(session, assets, persist=sessions.persister(session.id))
        exporter = Exporter(tmp_path)
        rows = exporter.rows()
        assert len(rows) == 8 + 8 + 16
        by_phase = {}
        for row in rows:
            by_phase.setdefault(row["phase"], []).append(row)
        assert len(by_phase["diagnose"]) == 8
        assert len(by_phase["predict"]) == 8
        assert len(by_phase["respond"]) == 16
        for row in by_phase["diagnose"]:
            assert row["rating"] == 80
        for row in by_phase["respond"]:
            assert row["certify"] is True
            assert row["justification_bitmap"] == justification_bitmap(
                ("correct_answer", "other"))
            assert row["ground_truth"] in ("present", "absent")

    def test_bitmap_encoding(self):
        assert justification_bitmap(()) == 0
        assert justification_bitmap(("correct_answer",)) == 1
        assert justification_bitmap(("other",)) == 32
        assert justification_bitmap(JUSTIFICATION_OPTIONS) == 63

    def test_restore_resumes_mid_session(self, tmp_path, desk_corpus, desk_bundles):
        store, _, _ = desk_corpus
        bundles, assets = desk_bundles
        factory = lambda seed: build_study_plan(store, bundles, seed)
        sessions = SessionStore(tmp_path, factory)
        session = sessions.create(seed=31)
        persist = sessions.persister(session.id)
        payload = next_trial(session, assets)
        record_response(session, ResponseRecord(
            session_id=session.id, trial_id=payload["trial_id"],
            phase="diagnose", rating=80), persist=persist)

        rebuilt = SessionStore(tmp_path, factory)
        assert rebuilt.restore() == 1
        resumed = rebuilt.get(session.id)
        assert resumed.trial_pos == session.trial_pos
        assert resumed.phase_pos == session.phase_pos == 1
        payload2 = next_trial(resumed, assets)
        assert payload2["phase"] == "predict"
        assert payload2["diagnosis"] == 80
