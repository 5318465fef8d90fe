"""Experiment protocol: counterbalanced blocks, sessions, and export.

A session runs three blocks of eight trials each. The prediction block
asks for a diagnosis, shows the four teaching examples and the target's
saliency map, then asks the participant to predict the model's call and
gives feedback. The two certification blocks show the model's judgement
(with examples in one block, without in the other) and collect a
certify/agree decision with justifications. Targets are counterbalanced
two per confusion category per block; the sixteen certification targets
form eight same-category pairs matched by L1 distance between their
probability maps and split across the two blocks at random.

Sessions persist as append-only JSONL files, one per session, so state
survives restarts and export works offline.
"""
from __future__ import annotations

import itertools
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bundle import ExplanationBundle
from .data import ImageStore, LabeledImage
from .errors import (
    DimensionMismatch,
    InsufficientCategory,
    OddCount,
    OutOfOrder,
    UnknownSession,
    ValidationError,
)
from .model import LABEL_NAMES, PRESENT, ProbMap
from .teaching import CATEGORIES

PAYLOAD_SCHEMA_VERSION = 1

BLOCK_PREDICTION = "prediction"
BLOCK_CERT_EXAMPLES = "cert_examples"
BLOCK_CERT_NO_EXAMPLES = "cert_no_examples"

RATING_MIN = 0
RATING_MAX = 100
RATING_FORBIDDEN = 50
SCALE_LOW_LABEL = "Certain pneumothorax absent"
SCALE_HIGH_LABEL = "Certain pneumothorax present"

JUSTIFICATION_OPTIONS = (
    "correct_answer",            # The robot got the correct answer
    "appropriately_confident",   # The robot was appropriately confident
    "looked_right_place",        # The robot looked in the right place
    "examples_informative",      # The examples are informative
    "not_certain",               # I am not certain I should certify
    "other",                     # Other
)
FREE_TEXT_REQUIRED = frozenset(
    {"examples_informative", "not_certain", "other"})

PREDICTION_PHASES = ("diagnose", "predict")
CERTIFICATION_PHASES = ("respond",)

PREDICTION_TARGETS_PER_CATEGORY = 2
CERTIFICATION_TARGETS_PER_CATEGORY = 4


@dataclass(frozen=True)
class TrialSpec:
    block: str
    index: int                   # position within its block after shuffling
    target: LabeledImage
    bundle: ExplanationBundle    # asset source; examples shown only when show_examples
    show_examples: bool
    show_ai_judgement: bool

    @property
    def trial_id(self) -> str:
        return f"{self.block}-{self.index}"

    @property
    def ai_prob(self) -> float:
        return self.target.model_prob

    @property
    def ai_label(self) -> int:
        return self.target.model_label

    @property
    def category(self) -> str:
        return self.target.category

    @property
    def phases(self) -> tuple[str, ...]:
        return PREDICTION_PHASES if self.block == BLOCK_PREDICTION else CERTIFICATION_PHASES


@dataclass(frozen=True)
class StudyPlan:
    seed: int
    prediction: tuple[TrialSpec, ...]
    cert_examples: tuple[TrialSpec, ...]
    cert_no_examples: tuple[TrialSpec, ...]
    block_order: tuple[str, ...]    # order of the two certification blocks

    def trials(self) -> list[TrialSpec]:
        blocks = {BLOCK_CERT_EXAMPLES: self.cert_examples,
                  BLOCK_CERT_NO_EXAMPLES: self.cert_no_examples}
        out = list(self.prediction)
        for name in self.block_order:
            out.extend(blocks[name])
        return out


def l1_distance(a: ProbMap, b: ProbMap) -> float:
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatch(
            f"maps are {a.width}x{a.height} vs {b.width}x{b.height}")
    return float(np.abs(a.values.astype(np.float64) - b.values.astype(np.float64)).sum())


def _all_pairings(indices: tuple[int, ...]):
    """Every perfect matching of the index set."""
    if not indices:
        yield ()
        return
    first, rest = indices[0], indices[1:]
    for i, partner in enumerate(rest):
        for tail in _all_pairings(rest[:i] + rest[i + 1:]):
            yield ((first, partner),) + tail


def pair_by_l1(candidates: list[tuple[str, ProbMap]]) -> list[tuple[str, str]]:
    """Pair candidates minimising the summed L1 distance within pairs.

    Exact (exhaustive over all perfect matchings) for up to 8 candidates;
    larger inputs use greedy nearest-pair matching, which may be
    suboptimal.
    """
    n = len(candidates)
    if n < 2 or n % 2 != 0:
        raise OddCount(f"need an even number of candidates >= 2, got {n}")
    dist = {}
    for (i, (_, a)), (j, (_, b)) in itertools.combinations(enumerate(candidates), 2):
        dist[i, j] = l1_distance(a, b)

    if n <= 8:
        best_cost, best = min(
            (sum(dist[p] for p in pairing), pairing)
            for pairing in _all_pairings(tuple(range(n)))
        )
        chosen = best
    else:
        remaining = list(range(n))
        chosen = []
        while remaining:
            i, j = min(
                ((a, b) for a, b in itertools.combinations(remaining, 2)),
                key=lambda ij: (dist[ij], ij))
            chosen.append((i, j))
            remaining.remove(i)
            remaining.remove(j)
    return [(candidates[i][0], candidates[j][0]) for i, j in sorted(chosen)]


def build_study_plan(store: ImageStore, bundles: dict[str, ExplanationBundle],
                     participant_seed: int) -> StudyPlan:
    """Deterministic plan for one participant.

    Target selection depends only on the dataset (the first two images
    of each category become prediction targets, the next four become
    certification candidates), so different participants see the same
    images; the seed drives pair-to-block assignment, certification
    block order, and trial order within blocks.
    """
    eligible = {c: [] for c in CATEGORIES}
    for img in store.images:
        if img.category is not None and img.id in bundles:
            eligible[img.category].append(img)

    needed = PREDICTION_TARGETS_PER_CATEGORY + CERTIFICATION_TARGETS_PER_CATEGORY
    for cat in CATEGORIES:
        if len(eligible[cat]) < needed:
            raise InsufficientCategory(cat, needed, len(eligible[cat]))

    rng = np.random.default_rng(participant_seed)
    prediction_targets = []
    cert_block_a = []   # with examples
    cert_block_b = []   # without examples
    for cat in CATEGORIES:
        picked = eligible[cat][:needed]
        prediction_targets.extend(picked[:PREDICTION_TARGETS_PER_CATEGORY])
        cert = picked[PREDICTION_TARGETS_PER_CATEGORY:]
        pairs = pair_by_l1([(img.id, store.map_for(img.id)) for img in cert])
        by_id = {img.id: img for img in cert}
        for left, right in pairs:
            if int(rng.integers(0, 2)) == 0:
                cert_block_a.append(by_id[left])
                cert_block_b.append(by_id[right])
            else:
                cert_block_a.append(by_id[right])
                cert_block_b.append(by_id[left])

    first_cert = (BLOCK_CERT_EXAMPLES if int(rng.integers(0, 2)) == 0
                  else BLOCK_CERT_NO_EXAMPLES)
    block_order = ((BLOCK_CERT_EXAMPLES, BLOCK_CERT_NO_EXAMPLES)
                   if first_cert == BLOCK_CERT_EXAMPLES
                   else (BLOCK_CERT_NO_EXAMPLES, BLOCK_CERT_EXAMPLES))

    def shuffled(block: str, targets, with_examples: bool, judged: bool):
        order = rng.permutation(len(targets))
        return tuple(
            TrialSpec(block=block, index=i, target=targets[int(k)],
                      bundle=bundles[targets[int(k)].id],
                      show_examples=with_examples,
                      show_ai_judgement=judged)
            for i, k in enumerate(order))

    return StudyPlan(
        seed=participant_seed,
        prediction=shuffled(BLOCK_PREDICTION, prediction_targets, True, False),
        cert_examples=shuffled(BLOCK_CERT_EXAMPLES, cert_block_a, True, True),
        cert_no_examples=shuffled(BLOCK_CERT_NO_EXAMPLES, cert_block_b, False, True),
        block_order=block_order,
    )


@dataclass
class ResponseRecord:
    session_id: str
    trial_id: str
    phase: str
    rating: int | None = None
    certify: bool | None = None
    agree: bool | None = None
    justifications: tuple[str, ...] = ()
    free_text: str = ""
    timestamps: dict = field(default_factory=dict)
    recorded_at: float | None = None

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "trial_id": self.trial_id,
            "phase": self.phase,
            "rating": self.rating,
            "certify": self.certify,
            "agree": self.agree,
            "justifications": list(self.justifications),
            "free_text": self.free_text,
            "timestamps": self.timestamps,
            "recorded_at": self.recorded_at,
        }


@dataclass
class Session:
    id: str
    plan: StudyPlan
    trial_pos: int = 0
    phase_pos: int = 0
    records: list[ResponseRecord] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def done(self) -> bool:
        return self.trial_pos >= len(self.plan.trials())

    def current_trial(self) -> TrialSpec:
        return self.plan.trials()[self.trial_pos]

    def current_phase(self) -> str:
        return self.current_trial().phases[self.phase_pos]

    def stored_rating(self, trial_id: str, phase: str) -> int | None:
        for r in self.records:
            if r.trial_id == trial_id and r.phase == phase:
                return r.rating
        return None


def _entry_payload(entry, assets_root: Path, include_truth: bool) -> dict:
    doc = {
        "role": entry.role,
        "id": entry.image.id,
        "ai_label": LABEL_NAMES[entry.image.model_label],
        "ai_prob": entry.image.model_prob,
        "display_url": "/assets/" + entry.display_path.relative_to(assets_root).as_posix(),
        "saliency_url": "/assets/" + entry.saliency_path.relative_to(assets_root).as_posix(),
    }
    if include_truth:
        doc["ground_truth"] = LABEL_NAMES[entry.image.ground_truth]
    return doc


def next_trial(session: Session, assets_root: Path) -> dict:
    """Payload for the session's current trial and phase.

    The prediction block serves two phases: "diagnose" (target display
    only, no saliency, no model output) and, once the diagnosis is
    recorded, "predict" (examples in tp/tn/fp/fn order, target saliency,
    and the participant's own diagnosis echoed for the reminder screen).
    Certification trials serve one "respond" phase; the model's
    judgement is shown there and examples appear only in the block that
    has them. Ground truth is included for examples, never for targets.
    """
    with session.lock:
        if session.done:
            return {"schema_version": PAYLOAD_SCHEMA_VERSION, "done": True,
                    "trials_completed": len(session.plan.trials())}
        trial = session.current_trial()
        phase = session.current_phase()
        target_entry = trial.bundle.target
        sal_url = ("/assets/" + target_entry.saliency_path
                   .relative_to(assets_root).as_posix())
        payload = {
            "schema_version": PAYLOAD_SCHEMA_VERSION,
            "done": False,
            "trial_id": trial.trial_id,
            "block": trial.block,
            "trial_index": session.trial_pos,
            "phase": phase,
            "rating_scale": {
                "min": RATING_MIN, "max": RATING_MAX,
                "forbidden": RATING_FORBIDDEN,
                "low_label": SCALE_LOW_LABEL, "high_label": SCALE_HIGH_LABEL,
            },
            "target": {
                "id": trial.target.id,
                "display_url": ("/assets/" + target_entry.display_path
                                .relative_to(assets_root).as_posix()),
            },
        }

        def example_payloads():
            return [_entry_payload(e, assets_root, include_truth=True)
                    for e in trial.bundle.examples]

        if trial.block == BLOCK_PREDICTION:
            if phase == "diagnose":
                pass    # the bare target only: no saliency, no examples, no model output
            else:
                payload["target"]["saliency_url"] = sal_url
                payload["examples"] = example_payloads()
                payload["diagnosis"] = session.stored_rating(trial.trial_id, "diagnose")
        else:
            payload["ai"] = {"label": LABEL_NAMES[trial.ai_label],
                             "prob": trial.ai_prob}
            payload["target"]["saliency_url"] = sal_url
            payload["examples"] = example_payloads() if trial.show_examples else []
            payload["justification_options"] = list(JUSTIFICATION_OPTIONS)
        return payload


def _validate_rating(rating) -> int:
    if not isinstance(rating, int) or isinstance(rating, bool):
        raise ValidationError(f"rating must be an integer, got {rating!r}")
    if not RATING_MIN <= rating <= RATING_MAX:
        raise ValidationError(f"rating {rating} outside [{RATING_MIN}, {RATING_MAX}]")
    if rating == RATING_FORBIDDEN:
        raise ValidationError(f"rating of exactly {RATING_FORBIDDEN} is not allowed")
    return rating


def record_response(session: Session, record: ResponseRecord,
                    persist=None) -> dict:
    """Validate and store a response for the current trial phase.

    Advances the session exactly one phase; the prediction phase's
    acknowledgement carries feedback (the prediction counts as correct
    when rating > 50 matches the model calling the target present).
    """
    with session.lock:
        if session.done:
            raise OutOfOrder("session is already complete")
        trial = session.current_trial()
        phase = session.current_phase()
        if record.trial_id != trial.trial_id or record.phase != phase:
            raise OutOfOrder(
                f"expected {trial.trial_id}/{phase}, "
                f"got {record.trial_id}/{record.phase}")

        if phase in ("diagnose", "predict"):
            _validate_rating(record.rating)
        else:
            if not isinstance(record.certify, bool):
                raise ValidationError("certify must be a boolean")
            if not isinstance(record.agree, bool):
                raise ValidationError("agree must be a boolean")
            bad = [j for j in record.justifications if j not in JUSTIFICATION_OPTIONS]
            if bad:
                raise ValidationError(f"unknown justification(s): {bad}")
            if len(set(record.justifications)) != len(record.justifications):
                raise ValidationError("duplicate justifications")
            if FREE_TEXT_REQUIRED & set(record.justifications) and not record.free_text.strip():
                raise ValidationError(
                    "free text is required for the chosen justification(s)")

        record.recorded_at = time.time()
        session.records.append(record)
        if persist is not None:
            persist(record)

        ack = {"schema_version": PAYLOAD_SCHEMA_VERSION, "ok": True,
               "trial_id": trial.trial_id, "phase": phase}
        if phase == "predict":
            correct = (record.rating > RATING_FORBIDDEN) == (trial.ai_label == PRESENT)
            ack["feedback"] = {"correct": correct,
                               "ai_label": LABEL_NAMES[trial.ai_label],
                               "ai_prob": trial.ai_prob}
        if session.phase_pos + 1 < len(trial.phases):
            session.phase_pos += 1
        else:
            session.phase_pos = 0
            session.trial_pos += 1
        ack["done"] = session.done
        return ack


class SessionStore:
    """Disk-backed registry of sessions (one JSONL file per session)."""

    def __init__(self, sessions_dir, plan_factory):
        self.dir = Path(sessions_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._plan_factory = plan_factory
        self._sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()

    def create(self, seed: int | None = None) -> Session:
        if seed is None:
            seed = int(uuid.uuid4().int % 2**32)
        session_id = uuid.uuid4().hex
        session = Session(id=session_id, plan=self._plan_factory(seed))
        with self._registry_lock:
            self._sessions[session_id] = session
        # Trial metadata rides along so exports need nothing beyond the
        # session files themselves.
        trials = [{
            "trial_id": t.trial_id, "block": t.block, "index": t.index,
            "target_id": t.target.id, "category": t.category,
            "ai_label": LABEL_NAMES[t.ai_label], "ai_prob": t.ai_prob,
            "ground_truth": LABEL_NAMES[t.target.ground_truth],
        } for t in session.plan.trials()]
        path = self._path(session_id)
        with open(path, "w") as fh:
            fh.write(json.dumps({"type": "created", "session_id": session_id,
                                 "seed": seed, "trials": trials}) + "\n")
        return session

    def get(self, session_id: str) -> Session:
        with self._registry_lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSession(f"no session {session_id!r}") from None

    def persister(self, session_id: str):
        path = self._path(session_id)

        def persist(record: ResponseRecord):
            with open(path, "a") as fh:
                fh.write(json.dumps({"type": "response", **record.to_json()}) + "\n")
                fh.flush()
        return persist

    def restore(self) -> int:
        """Rebuild in-memory sessions by replaying the session files."""
        loaded = 0
        for path in sorted(self.dir.glob("*.jsonl")):
            session = None
            for line in path.read_text().splitlines():
                if not line.strip():
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn tail line from an interrupted write
                if doc.get("type") == "created":
                    session = Session(id=doc["session_id"],
                                      plan=self._plan_factory(doc["seed"]))
                elif doc.get("type") == "response" and session is not None:
                    record = ResponseRecord(
                        session_id=doc["session_id"], trial_id=doc["trial_id"],
                        phase=doc["phase"], rating=doc.get("rating"),
                        certify=doc.get("certify"), agree=doc.get("agree"),
                        justifications=tuple(doc.get("justifications") or ()),
                        free_text=doc.get("free_text") or "",
                        timestamps=doc.get("timestamps") or {},
                        recorded_at=doc.get("recorded_at"))
                    session.records.append(record)
                    trial = session.current_trial()
                    if session.phase_pos + 1 < len(trial.phases):
                        session.phase_pos += 1
                    else:
                        session.phase_pos = 0
                        session.trial_pos += 1
            if session is not None:
                with self._registry_lock:
                    self._sessions[session.id] = session
                loaded += 1
        return loaded

    def _path(self, session_id: str) -> Path:
        return self.dir / f"{session_id}.jsonl"


EXPORT_COLUMNS = (
    "session_id", "block", "trial_index", "trial_id", "target_id", "category",
    "ai_label", "ai_prob", "ground_truth", "phase", "rating", "certify",
    "agree", "justification_bitmap", "justifications", "free_text",
    "timestamps", "recorded_at",
)


def justification_bitmap(justifications) -> int:
    bitmap = 0
    for j in justifications:
        bitmap |= 1 << JUSTIFICATION_OPTIONS.index(j)
    return bitmap


class Exporter:
    """Builds flat response rows from session files alone."""

    def __init__(self, sessions_dir):
        self.dir = Path(sessions_dir)

    def rows(self) -> list[dict]:
        out = []
        for path in sorted(self.dir.glob("*.jsonl")):
            trials = {}
            for line in path.read_text().splitlines():
                if not line.strip():
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError:
                    continue  # a line still being written by a live session
                if doc.get("type") == "created":
                    trials = {t["trial_id"]: t for t in doc.get("trials", [])}
                    continue
                if doc.get("type") != "response":
                    continue
                trial = trials.get(doc["trial_id"])
                if trial is None:
                    continue
                out.append({
                    "session_id": doc["session_id"],
                    "block": trial["block"],
                    "trial_index": trial["index"],
                    "trial_id": doc["trial_id"],
                    "target_id": trial["target_id"],
                    "category": trial["category"],
                    "ai_label": trial["ai_label"],
                    "ai_prob": trial["ai_prob"],
                    "ground_truth": trial["ground_truth"],
                    "phase": doc["phase"],
                    "rating": doc.get("rating"),
                    "certify": doc.get("certify"),
                    "agree": doc.get("agree"),
                    "justification_bitmap": justification_bitmap(
                        doc.get("justifications") or ()),
                    "justifications": ";".join(doc.get("justifications") or ()),
                    "free_text": doc.get("free_text") or "",
                    "timestamps": json.dumps(doc.get("timestamps") or {},
                                             sort_keys=True),
                    "recorded_at": doc.get("recorded_at"),
                })
        return out

    def to_csv(self) -> str:
        import csv
        import io

        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=EXPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow(row)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"schema_version": PAYLOAD_SCHEMA_VERSION,
                           "responses": self.rows()}, indent=2)

    def write(self, csv_path, json_path) -> None:
        Path(csv_path).write_text(self.to_csv())
        Path(json_path).write_text(self.to_json())


def export_sessions(sessions_dir) -> Exporter:
    """Offline export over a directory of session files; each file is
    self-describing, so no dataset or model is needed."""
    return Exporter(sessions_dir)
