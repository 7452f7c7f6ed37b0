"""Session planning, the trial state machine, and append-only session logs.

The state machine is pure with respect to time: it never reads a wall
clock, every event carries its own timestamp, and advancing returns
declarative effects for a UI to execute (show a crosshair, present a
scene, play a feedback flag, show a questionnaire). Replaying a logged
event trace through a fresh session reproduces the log byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .scenes import SetConfig, TrialScene, config_to_dict, generate_set

TLX_SUBSCALES = (
    "mental_demand",
    "physical_demand",
    "temporal_demand",
    "performance",
    "effort",
    "frustration",
)

EXP1_KINDS = ("exp1_4", "exp1_16", "exp1_30")
EXP2_KINDS = ("depth2", "depth2_color_shape", "depth3_color")

LOG_FORMAT = "session-log"
LOG_VERSION = 1

BRIEFING_TEXT = (
    "You will see a series of brief three-dimensional scenes of floating "
    "objects. In half of them, one object is highlighted. Keep your eyes on "
    "the central crosshair; after each flash, answer yes or no: was a "
    "highlighted object present? Training rounds give feedback on each answer."
)


class ProtocolError(RuntimeError):
    """An event that is illegal in the current phase; session state is unchanged."""


class ChecksumError(ValueError):
    """An exported log failed its integrity check on reload."""


@dataclass(frozen=True)
class QuestionnaireRecord:
    """One submitted questionnaire: six workload subscales or the two custom items."""

    kind: str  # "nasa_tlx" | "custom"
    block_label: str
    tlx: dict[str, int] | None = None
    clearness: int | None = None
    decision_making: int | None = None
    timestamp_ms: float = 0.0

    def __post_init__(self):
        if self.kind == "nasa_tlx":
            if self.tlx is None or set(self.tlx) != set(TLX_SUBSCALES):
                raise ValueError(f"nasa_tlx record needs all subscales {TLX_SUBSCALES}")
            for name, value in self.tlx.items():
                if not isinstance(value, int) or not 0 <= value <= 100 or value % 5 != 0:
                    raise ValueError(f"{name}={value!r}: scores are integers 0-100 in steps of 5")
        elif self.kind == "custom":
            for name, value in (("clearness", self.clearness), ("decision_making", self.decision_making)):
                if not isinstance(value, int) or not 0 <= value <= 6:
                    raise ValueError(f"{name}={value!r}: custom items are integers 0-6")
        else:
            raise ValueError(f"unknown questionnaire kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "block_label": self.block_label, "t": self.timestamp_ms}
        if self.kind == "nasa_tlx":
            d["tlx"] = dict(self.tlx)
        else:
            d["clearness"] = self.clearness
            d["decision_making"] = self.decision_making
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QuestionnaireRecord":
        return cls(
            kind=d["kind"],
            block_label=d["block_label"],
            tlx=dict(d["tlx"]) if d.get("tlx") is not None else None,
            clearness=d.get("clearness"),
            decision_making=d.get("decision_making"),
            timestamp_ms=d.get("t", 0.0),
        )


@dataclass(frozen=True)
class ResponseRecord:
    scene_id: str
    set_kind: str
    training: bool
    block_index: int
    answer: bool  # yes = True
    target_present: bool
    correct: bool
    response_latency_ms: float
    timestamp_ms: float
    target_row: int | None = None
    target_col: int | None = None
    target_plane: int | None = None

    def __post_init__(self):
        if self.correct != (self.answer == self.target_present):
            raise ValueError("correct must equal (answer == target_present)")

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "set_kind": self.set_kind,
            "training": self.training,
            "block_index": self.block_index,
            "answer": self.answer,
            "target_present": self.target_present,
            "correct": self.correct,
            "latency_ms": self.response_latency_ms,
            "t": self.timestamp_ms,
            "target_row": self.target_row,
            "target_col": self.target_col,
            "target_plane": self.target_plane,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResponseRecord":
        return cls(
            scene_id=d["scene_id"],
            set_kind=d["set_kind"],
            training=d["training"],
            block_index=d["block_index"],
            answer=d["answer"],
            target_present=d["target_present"],
            correct=d["correct"],
            response_latency_ms=d["latency_ms"],
            timestamp_ms=d["t"],
            target_row=d.get("target_row"),
            target_col=d.get("target_col"),
            target_plane=d.get("target_plane"),
        )


@dataclass(frozen=True)
class Block:
    kind: str  # briefing | training | trial_block | pause | questionnaire
    set_kind: str | None = None
    scenes: tuple[TrialScene, ...] = ()
    config: SetConfig | None = None
    duration_s: float = 0.0
    label: str = ""

    def echo(self) -> dict:
        d = {"kind": self.kind, "label": self.label}
        if self.set_kind:
            d["set_kind"] = self.set_kind
            d["n_scenes"] = len(self.scenes)
            d["config"] = config_to_dict(self.config)
        if self.kind == "pause":
            d["duration_s"] = self.duration_s
        return d


@dataclass(frozen=True)
class SessionPlan:
    participant_id: str
    rng_seed: int
    blocks: tuple[Block, ...]

    def __post_init__(self):
        previous_training: str | None = None
        for block in self.blocks:
            if block.kind == "training":
                previous_training = block.set_kind
            elif block.kind == "trial_block":
                if previous_training != block.set_kind:
                    raise ValueError(
                        f"trial block {block.set_kind!r} is not preceded by a "
                        f"training block of the same set kind"
                    )
                previous_training = None

    def echo(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "rng_seed": self.rng_seed,
            "blocks": [b.echo() for b in self.blocks],
        }

    def scene_index(self) -> dict[str, TrialScene]:
        out: dict[str, TrialScene] = {}
        for block in self.blocks:
            for scene in block.scenes:
                out[scene.scene_id] = scene
        return out


def _derive_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence((seed & ((1 << 64) - 1),) + key).generate_state(1)[0])


def build_default_plan(
    participant_id: str,
    seed: int,
    scenes_per_set: int = 48,
    training_scenes: int = 20,
) -> SessionPlan:
    """The standard six-set session: three homogeneous sets in ascending
    object count, then the three heterogeneous sets in seeded random order,
    each preceded by its own training round, pauses between sets, and a
    questionnaire after each half."""
    exp2 = list(EXP2_KINDS)
    order = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed & ((1 << 64) - 1), 2))))
    exp2 = [exp2[i] for i in order.permutation(len(exp2))]
    kinds = list(EXP1_KINDS) + exp2

    blocks: list[Block] = [Block(kind="briefing", label="briefing")]
    for i, kind in enumerate(kinds):
        train_cfg = SetConfig(
            set_kind=kind,
            scenes_per_set=training_scenes,
            rng_seed=_derive_seed(seed, 4, i),
        )
        scored_cfg = SetConfig(
            set_kind=kind,
            scenes_per_set=scenes_per_set,
            rng_seed=_derive_seed(seed, 3, i),
        )
        blocks.append(
            Block(
                kind="training",
                set_kind=kind,
                scenes=tuple(generate_set(train_cfg)),
                config=train_cfg,
                label=f"training_{kind}",
            )
        )
        blocks.append(
            Block(
                kind="trial_block",
                set_kind=kind,
                scenes=tuple(generate_set(scored_cfg)),
                config=scored_cfg,
                label=f"scored_{kind}",
            )
        )
        if i == 2:
            blocks.append(Block(kind="questionnaire", label="after_exp1"))
        if i < len(kinds) - 1:
            blocks.append(Block(kind="pause", duration_s=scored_cfg.pause_s, label=f"pause_{i}"))
    blocks.append(Block(kind="questionnaire", label="after_exp2"))
    return SessionPlan(participant_id=participant_id, rng_seed=seed, blocks=tuple(blocks))


@dataclass(frozen=True)
class Event:
    kind: str  # tick | response | ui_ready | skip_requested | questionnaire_submitted
    now: float  # milliseconds on the caller's clock
    answer: bool | None = None
    record: QuestionnaireRecord | None = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "t": self.now}
        if self.answer is not None:
            d["answer"] = self.answer
        if self.record is not None:
            d["record"] = self.record.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        record = QuestionnaireRecord.from_dict(d["record"]) if "record" in d else None
        return cls(kind=d["kind"], now=d["t"], answer=d.get("answer"), record=record)


class SessionLog:
    """Append-only record of everything that happened in one session."""

    def __init__(self, plan: SessionPlan):
        self.participant_id = plan.participant_id
        self.rng_seed = plan.rng_seed
        self.plan_echo = plan.echo()
        self.entries: list[dict] = []

    def append(self, entry: dict):
        self.entries.append(entry)

    @property
    def responses(self) -> list[ResponseRecord]:
        return [ResponseRecord.from_dict(e) for e in self.entries if e.get("type") == "response"]

    @property
    def questionnaires(self) -> list[QuestionnaireRecord]:
        return [QuestionnaireRecord.from_dict(e) for e in self.entries if e.get("type") == "questionnaire"]

    @property
    def events(self) -> list[Event]:
        return [Event.from_dict(e) for e in self.entries if e.get("type") == "event"]


class Session:
    """One participant's run through a plan, driven by timestamped events."""

    def __init__(self, plan: SessionPlan):
        self.plan = plan
        self.log = SessionLog(plan)
        self.phase = "init"
        self.block_index = -1
        self.trial_index = 0
        self.phase_deadline: float | None = None
        self._stimulus_onset: float | None = None
        self._answered = False
        self._last_now = float("-inf")

    # -- introspection helpers ------------------------------------------------

    @property
    def current_block(self) -> Block | None:
        if 0 <= self.block_index < len(self.plan.blocks):
            return self.plan.blocks[self.block_index]
        return None

    @property
    def current_scene(self) -> TrialScene | None:
        block = self.current_block
        if block and block.kind in ("training", "trial_block") and self.trial_index < len(block.scenes):
            return block.scenes[self.trial_index]
        return None

    @property
    def complete(self) -> bool:
        return self.phase == "complete"

    # -- the state machine ----------------------------------------------------

    def advance(self, event: Event) -> list[dict]:
        self._check_legal(event)  # raises before any state or log change
        handler = {
            "tick": self._on_tick,
            "response": self._on_response,
            "ui_ready": self._on_ui_ready,
            "skip_requested": self._on_skip,
            "questionnaire_submitted": self._on_questionnaire,
        }[event.kind]
        self._log_entry({"type": "event", **event.to_dict()})
        self._last_now = event.now
        return handler(event)

    def _check_legal(self, event: Event):
        if event.now < self._last_now:
            raise ProtocolError(
                f"event time {event.now} precedes the session clock {self._last_now}"
            )
        kind = event.kind
        if kind == "tick":
            return
        if kind == "response":
            if self.phase not in ("stimulus", "awaiting_response"):
                raise ProtocolError(f"response event is illegal in phase {self.phase!r}")
            if event.answer is None:
                raise ProtocolError("response event needs an answer")
            if self._answered:
                raise ProtocolError("trial already answered")
            return
        if kind == "ui_ready":
            return
        if kind == "skip_requested":
            if self.phase != "pause":
                raise ProtocolError(f"skip_requested is illegal in phase {self.phase!r}")
            return
        if kind == "questionnaire_submitted":
            if self.phase != "questionnaire":
                raise ProtocolError(
                    f"questionnaire_submitted is illegal in phase {self.phase!r}"
                )
            if event.record is None:
                raise ProtocolError("questionnaire_submitted needs a record")
            if event.record.block_label != self.current_block.label:
                raise ProtocolError(
                    f"record labeled {event.record.block_label!r} submitted in "
                    f"block {self.current_block.label!r}"
                )
            return
        raise ProtocolError(f"unknown event kind {kind!r} (phase={self.phase})")

    def _log_entry(self, entry: dict):
        self.log.append(entry)

    def _log_phase(self, now: float):
        self._log_entry(
            {
                "type": "phase",
                "t": now,
                "phase": self.phase,
                "block": self.block_index,
                "trial": self.trial_index,
            }
        )

    def _on_tick(self, event: Event) -> list[dict]:
        now = event.now
        if self.phase == "init":
            return self._enter_block(0, now)
        if self.phase == "crosshair" and now >= self.phase_deadline:
            return self._enter_stimulus(now)
        if self.phase == "stimulus" and now >= self.phase_deadline:
            effects = [{"type": "hide_scene"}]
            if self._answered:
                effects += self._next_trial(now)
            else:
                self.phase = "awaiting_response"
                self.phase_deadline = None
                self._log_phase(now)
                effects.append({"type": "prompt_response"})
            return effects
        if self.phase == "pause" and now >= self.phase_deadline:
            return self._enter_block(self.block_index + 1, now)
        return []

    def _on_response(self, event: Event) -> list[dict]:
        block = self.current_block
        scene = self.current_scene
        record = ResponseRecord(
            scene_id=scene.scene_id,
            set_kind=block.set_kind,
            training=block.kind == "training",
            block_index=self.block_index,
            answer=event.answer,
            target_present=scene.target_present,
            correct=event.answer == scene.target_present,
            response_latency_ms=event.now - self._stimulus_onset,
            timestamp_ms=event.now,
            target_row=scene.target.grid_cell[0] if scene.target else None,
            target_col=scene.target.grid_cell[1] if scene.target else None,
            target_plane=scene.target.depth_plane if scene.target else None,
        )
        self._answered = True
        self._log_entry({"type": "response", **record.to_dict()})
        effects = []
        if block.kind == "training":
            # feedback is a logged flag; sonifying it is the UI's concern
            prev_phase = self.phase
            self.phase = "feedback"
            self._log_phase(event.now)
            self.phase = prev_phase
            effects.append({"type": "feedback", "correct": record.correct})
        if self.phase == "awaiting_response":
            effects += self._next_trial(event.now)
        return effects

    def _on_ui_ready(self, event: Event) -> list[dict]:
        if self.phase == "init":
            return self._enter_block(0, event.now)
        if self.phase in ("briefing", "questionnaire"):
            return self._enter_block(self.block_index + 1, event.now)
        return []

    def _on_skip(self, event: Event) -> list[dict]:
        return self._enter_block(self.block_index + 1, event.now)

    def _on_questionnaire(self, event: Event) -> list[dict]:
        record = event.record
        self._log_entry({"type": "questionnaire", **record.to_dict()})
        return [{"type": "questionnaire_received", "kind": record.kind}]

    # -- transitions ----------------------------------------------------------

    def _enter_block(self, index: int, now: float) -> list[dict]:
        self.block_index = index
        self.trial_index = 0
        self._answered = False
        if index >= len(self.plan.blocks):
            self.phase = "complete"
            self.phase_deadline = None
            self._log_phase(now)
            return [{"type": "session_complete"}]
        block = self.plan.blocks[index]
        if block.kind == "briefing":
            self.phase = "briefing"
            self.phase_deadline = None
            self._log_phase(now)
            return [{"type": "show_briefing", "text": BRIEFING_TEXT}]
        if block.kind in ("training", "trial_block"):
            return self._enter_crosshair(now)
        if block.kind == "pause":
            self.phase = "pause"
            self.phase_deadline = now + block.duration_s * 1000.0
            self._log_phase(now)
            return [{"type": "show_pause", "duration_s": block.duration_s}]
        if block.kind == "questionnaire":
            self.phase = "questionnaire"
            self.phase_deadline = None
            self._log_phase(now)
            return [{"type": "show_questionnaire", "label": block.label}]
        raise AssertionError(block.kind)

    def _enter_crosshair(self, now: float) -> list[dict]:
        block = self.current_block
        self.phase = "crosshair"
        self._answered = False
        self.phase_deadline = now + block.config.crosshair_ms
        self._log_phase(now)
        scene = block.scenes[self.trial_index]
        return [
            {
                "type": "show_crosshair",
                "duration_ms": block.config.crosshair_ms,
                "next_scene_id": scene.scene_id,
                "block": self.block_index,
                "trial": self.trial_index,
                "training": block.kind == "training",
            }
        ]

    def _enter_stimulus(self, now: float) -> list[dict]:
        block = self.current_block
        self.phase = "stimulus"
        self.phase_deadline = now + block.config.exposure_ms
        self._stimulus_onset = now
        self._log_phase(now)
        scene = block.scenes[self.trial_index]
        return [
            {
                "type": "present_scene",
                "scene_id": scene.scene_id,
                "exposure_ms": block.config.exposure_ms,
            }
        ]

    def _next_trial(self, now: float) -> list[dict]:
        block = self.current_block
        if self.trial_index + 1 < len(block.scenes):
            self.trial_index += 1
            return self._enter_crosshair(now)
        return self._enter_block(self.block_index + 1, now)


# ---------------------------------------------------------------------------
# export / import

def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def export_session(log: SessionLog, path: str | Path | None = None) -> str:
    """Serialize a log as line-delimited records with an integrity checksum.

    The header line carries a sha256 over the canonical header (checksum
    field excluded) plus every entry line, so any byte flip is detected on
    reload. An empty session exports as the header line only.
    """
    header = {
        "type": "header",
        "format": LOG_FORMAT,
        "version": LOG_VERSION,
        "participant_id": log.participant_id,
        "rng_seed": log.rng_seed,
        "plan": log.plan_echo,
    }
    entry_lines = [_canonical(e) for e in log.entries]
    digest = hashlib.sha256()
    digest.update(_canonical(header).encode())
    for line in entry_lines:
        digest.update(line.encode())
    header["checksum"] = digest.hexdigest()
    text = "\n".join([_canonical(header)] + entry_lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_session(source: str | Path) -> SessionLog:
    """Reload an exported log, verifying its checksum."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text()
    else:
        text = source
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("empty session export")
    header = json.loads(lines[0])
    if header.get("format") != LOG_FORMAT or header.get("version") != LOG_VERSION:
        raise ValueError("not a supported session log")
    stored = header.pop("checksum", None)
    digest = hashlib.sha256()
    digest.update(_canonical(header).encode())
    entries = []
    for line in lines[1:]:
        entry = json.loads(line)
        digest.update(_canonical(entry).encode())
        entries.append(entry)
    if stored != digest.hexdigest():
        raise ChecksumError("session log failed its integrity check")

    log = SessionLog.__new__(SessionLog)
    log.participant_id = header["participant_id"]
    log.rng_seed = header["rng_seed"]
    log.plan_echo = header["plan"]
    log.entries = entries
    return log


# ---------------------------------------------------------------------------
# scripted participants

DEFAULT_TLX = {name: 50 for name in TLX_SUBSCALES}


def run_scripted_session(
    plan: SessionPlan,
    responder="perfect",
    latency_ms: float = 420.0,
    tlx_scores: dict[str, int] | None = None,
    custom_scores: tuple[int, int] = (4, 4),
) -> Session:
    """Drive a full session with a scripted participant; returns the session.

    ``responder`` is "perfect", "always_no", "always_yes", or a callable
    ``scene -> bool``. Response latency is measured from stimulus onset and
    must exceed the exposure so answers land in the response phase.
    """
    if responder == "perfect":
        decide = lambda scene: scene.target_present
    elif responder == "always_no":
        decide = lambda scene: False
    elif responder == "always_yes":
        decide = lambda scene: True
    elif callable(responder):
        decide = responder
    else:
        raise ValueError(f"unknown responder {responder!r}")

    session = Session(plan)
    t = 0.0
    session.advance(Event("tick", t))
    guard = 0
    while not session.complete:
        guard += 1
        if guard > 500_000:
            raise RuntimeError("scripted session failed to terminate")
        phase = session.phase
        if phase == "briefing":
            t += 1500.0
            session.advance(Event("ui_ready", t))
        elif phase == "crosshair":
            t = session.phase_deadline
            session.advance(Event("tick", t))
        elif phase == "stimulus":
            scene = session.current_scene
            answer = decide(scene)
            onset = session.phase_deadline - session.current_block.config.exposure_ms
            t = session.phase_deadline
            session.advance(Event("tick", t))
            t = onset + latency_ms
            session.advance(Event("response", t, answer=answer))
        elif phase == "pause":
            t = session.phase_deadline
            session.advance(Event("tick", t))
        elif phase == "questionnaire":
            label = session.current_block.label
            t += 2000.0
            session.advance(
                Event(
                    "questionnaire_submitted",
                    t,
                    record=QuestionnaireRecord(
                        kind="nasa_tlx",
                        block_label=label,
                        tlx=dict(tlx_scores or DEFAULT_TLX),
                        timestamp_ms=t,
                    ),
                )
            )
            t += 500.0
            session.advance(
                Event(
                    "questionnaire_submitted",
                    t,
                    record=QuestionnaireRecord(
                        kind="custom",
                        block_label=label,
                        clearness=custom_scores[0],
                        decision_making=custom_scores[1],
                        timestamp_ms=t,
                    ),
                )
            )
            t += 500.0
            session.advance(Event("ui_ready", t))
        else:
            raise RuntimeError(f"unexpected phase {phase!r}")
    return session


def replay_events(plan: SessionPlan, events: list[Event]) -> Session:
    """Re-run a logged event trace through a fresh session."""
    session = Session(plan)
    for event in events:
        session.advance(event)
    return session
