"""Session orchestration: calibration, validation, online spelling, replay.

A session runs on a virtual integer-millisecond clock: every event carries
``t_ms`` and identical configuration + seed reproduces the log byte for
byte.  The JSONL event stream (``session-log.v1``) is the single source for
metric reports and for bit-exact replay of every selection.

Event kinds, in the order a typical session emits them:

    session_start  config summary, seed, target, timing
    cue            prescribed key during calibration/validation (2 s green)
    suggestions    the ten frozen slots a trial will display
    flash          one row/column flash; carries features when enabled
    score          cumulative per-code evidence after each sequence
    trial_result   recognized vs intended key
    compose        text state after applying the recognized key
    validation     pass/fail summary of the validation phase
    model          the trained classifier, embedded for replay
    session_end    reason and selection count
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import yaml

from .composer import CompositionState, Key, KeyboardLayout, apply_key, parse_key_label
from .errors import InputError, ParameterError
from .metrics import SentenceRecord, record_from_log_events
from .paradigm import (
    SEQUENCES_DEFAULT,
    TimingParams,
    SelectionTrial,
    accumulate,
    flash_events,
    make_schedule,
    recognize,
    selection_duration_ms,
    sequence_span_ms,
)
from .signals import EegEpoch, decimate_epoch, feature_layout_hash
from .subject import (
    CopySpellPolicy,
    ImprovisePolicy,
    SubjectParams,
    SyntheticSubject,
)
from .suggestions import SuggestionEngine, make_provider
from .swlda import (
    TrainedModel,
    TrainingSet,
    build_training_set,
    model_to_payload,
    model_from_payload,
    score_rows,
    train,
)

LOG_FORMAT = "session-log.v1"

CALIBRATION_KEY_LABELS = (
    "A", "En", "B", "Sp", "E", "Z", "F", "Y", "M", "R",
    "H", "W", "K", "T", "I", "V", "U", "J", "N", "Q",
)
CALIBRATION_SEQUENCES = 5
CUE_MS = 2000
VALIDATION_MAX_TRIALS = 10
VALIDATION_RUN_LENGTH = 3
VALIDATION_KEY_POOL = 10

MODES = (
    "task1_chat",
    "task1_letter_only",
    "task2_improvise",
    "interactive",
)


@dataclass(frozen=True)
class SessionConfig:
    """Everything a scripted session needs; loads from one YAML document."""

    mode: str = "task1_chat"
    seed: int = 7
    target: str | None = "I WOULD LIKE TO HAVE WATER"
    provider: str = "mock"
    remote_base_url: str | None = None
    remote_model: str | None = None
    subject: SubjectParams = field(default_factory=lambda: SubjectParams(seed=7))
    timing: TimingParams = field(default_factory=TimingParams)
    n_sequences: int = SEQUENCES_DEFAULT
    log_path: str | None = None
    log_features: bool = True
    max_selections: int = 200
    improvise_first_letter: str = "H"
    improvise_n_words: int = 5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_sequences < 1:
            raise ParameterError(f"need at least 1 sequence, got {self.n_sequences}")
        if self.max_selections < 1:
            raise ParameterError(f"selection cap must be >= 1, got {self.max_selections}")
        if self.mode.startswith("task1") and not self.target:
            raise ParameterError("copy-spell modes need a target sentence")

    @property
    def letter_only(self) -> bool:
        return self.mode == "task1_letter_only"

    def selection_seconds(self) -> float:
        return selection_duration_ms(self.timing, self.n_sequences) / 1000.0


def config_to_dict(cfg: SessionConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    doc["target"] = cfg.target.replace(" ", "-") if cfg.target else None
    return doc


def config_from_dict(doc: dict) -> SessionConfig:
    doc = dict(doc)
    if doc.get("target"):
        doc["target"] = doc["target"].replace("-", " ")
    for key, cls in (("subject", SubjectParams), ("timing", TimingParams)):
        if isinstance(doc.get(key), dict):
            try:
                doc[key] = cls(**doc[key])
            except TypeError as exc:
                raise ParameterError(f"bad {key} section: {exc}") from exc
    known = {f.name for f in dataclasses.fields(SessionConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ParameterError(f"unknown config fields: {sorted(unknown)}")
    return SessionConfig(**doc)


def default_config_yaml() -> str:
    return yaml.safe_dump(config_to_dict(SessionConfig()), sort_keys=False)


def load_config(path: str) -> SessionConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ParameterError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParameterError(f"config {path} must hold a mapping")
    return config_from_dict(doc)


class EventLog:
    """Virtual-clock event collector; optionally mirrored to a JSONL file."""

    def __init__(self, path: str | None = None):
        self.t_ms = 0
        self.events: list[dict] = []
        self._fh = open(path, "w", encoding="utf-8") if path else None

    def advance(self, delta_ms: int) -> None:
        self.t_ms += int(delta_ms)

    def emit(self, event: str, **payload) -> dict:
        entry = {"t_ms": self.t_ms, "event": event, **payload}
        self.events.append(entry)
        if self._fh is not None:
            self._fh.write(json.dumps(entry, separators=(",", ":")) + "\n")
        return entry

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def read_log(path: str) -> list[dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read log {path}: {exc}") from exc
    events = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{i + 1}: not valid JSON: {exc}") from exc
    return events


# ---------------------------------------------------------------------------
# Trial mechanics
# ---------------------------------------------------------------------------


def _run_trial(
    cfg: SessionConfig,
    log: EventLog,
    schedule_rng: np.random.Generator,
    model: TrainedModel,
    epoch_source: Callable[[int], EegEpoch],
) -> Key:
    """One full selection: flashes, scoring per sequence, recognition.

    epoch_source maps a flash code to the epoch the operator produced for
    that flash; scores accumulate per stimulus code across sequences.
    """
    layout = KeyboardLayout()
    schedule = make_schedule(schedule_rng, cfg.n_sequences, cfg.timing)
    trial = SelectionTrial(schedule)
    base = log.t_ms
    span = sequence_span_ms(cfg.timing)
    per_code = np.zeros(13)
    for ev in flash_events(schedule):
        epoch = epoch_source(ev.code)
        features = decimate_epoch(epoch)
        value = score_rows(model, features[None, :])[0]
        per_code[ev.code - 1] = value
        log.t_ms = base + ev.on_ms
        flash_entry = {"code": ev.code, "sequence": ev.sequence, "off_ms": base + ev.off_ms}
        if cfg.log_features:
            flash_entry["features"] = features.tolist()
        log.emit("flash", **flash_entry)
        if ev.position == 12:  # last flash of the sequence
            accumulate(trial, per_code)
            log.t_ms = base + (ev.sequence + 1) * span
            log.emit(
                "score",
                sequence=ev.sequence,
                cumulative=[float(v) for v in trial.cumulative],
            )
            per_code = np.zeros(13)
    col_code, row_code = recognize(trial)
    log.t_ms = base + cfg.n_sequences * span
    key = layout.key_for_codes(col_code, row_code)
    return key


def _finish_trial_clock(cfg: SessionConfig, log: EventLog, base_ms: int) -> None:
    log.t_ms = base_ms + selection_duration_ms(cfg.timing, cfg.n_sequences)


# ---------------------------------------------------------------------------
# Phases
# ---------------------------------------------------------------------------


@dataclass
class CalibrationResult:
    training: TrainingSet
    model: TrainedModel
    events: list[dict]


@dataclass
class ValidationResult:
    passed: bool
    n_trials: int
    outcomes: list[bool]
    events: list[dict]


@dataclass
class OnlineResult:
    record: SentenceRecord
    final_state: CompositionState
    truncated: bool
    events: list[dict]


def _start(cfg: SessionConfig, log: EventLog, phase: str) -> None:
    log.emit(
        "session_start",
        format=LOG_FORMAT,
        phase=phase,
        mode=cfg.mode,
        seed=cfg.seed,
        target=cfg.target,
        provider=None if cfg.letter_only else cfg.provider,
        selection_duration_ms=selection_duration_ms(cfg.timing, cfg.n_sequences),
        n_sequences=cfg.n_sequences,
        subject=dataclasses.asdict(cfg.subject),
        feature_layout=feature_layout_hash(),
    )


def run_calibration(
    cfg: SessionConfig, log: EventLog | None = None, subject=None
) -> CalibrationResult:
    """Cue each of the 20 keys and collect 5 flash sequences per key.

    Yields 20 x 5 x 13 = 1300 labeled epochs (200 covering the cued key)
    and trains the stepwise discriminant on them.
    """
    own_log = log is None
    log = log or EventLog(cfg.log_path)
    _start(cfg, log, "calibration")
    subject = subject or SyntheticSubject(cfg.subject)
    schedule_rng = np.random.default_rng(cfg.seed)
    layout = KeyboardLayout()
    span = sequence_span_ms(cfg.timing)
    epochs: list[EegEpoch] = []
    for label in CALIBRATION_KEY_LABELS:
        key = parse_key_label(label)
        log.emit("cue", key=label)
        log.advance(CUE_MS)
        schedule = make_schedule(schedule_rng, CALIBRATION_SEQUENCES, cfg.timing)
        base = log.t_ms
        for ev in flash_events(schedule):
            epoch = subject.epoch_for_flash(key, ev.code)
            epochs.append(epoch)
            log.t_ms = base + ev.on_ms
            log.emit("flash", code=ev.code, sequence=ev.sequence, off_ms=base + ev.off_ms)
        log.t_ms = base + CALIBRATION_SEQUENCES * span
    training = build_training_set(epochs)
    model = train(training)
    log.emit("model", payload=model_to_payload(model))
    log.emit(
        "session_end",
        phase="calibration",
        n_epochs=len(epochs),
        n_target=int(np.sum(training.labels == 1)),
    )
    if own_log:
        log.close()
    return CalibrationResult(training, model, log.events)


def run_validation(
    cfg: SessionConfig,
    model: TrainedModel,
    log: EventLog | None = None,
    subject=None,
) -> ValidationResult:
    """Cued trials over the first 10 calibration keys until a run of 3.

    Passes as soon as three consecutive recognitions are correct; fails when
    ten trials complete without such a run.
    """
    own_log = log is None
    log = log or EventLog(cfg.log_path)
    _start(cfg, log, "validation")
    subject = subject or SyntheticSubject(cfg.subject)
    schedule_rng = np.random.default_rng(cfg.seed + 1)
    outcomes: list[bool] = []
    streak = 0
    passed = False
    for trial_index in range(VALIDATION_MAX_TRIALS):
        label = CALIBRATION_KEY_LABELS[trial_index % VALIDATION_KEY_POOL]
        intended = parse_key_label(label)
        log.emit("cue", key=label)
        log.advance(CUE_MS)
        base = log.t_ms
        recognized = _run_trial(
            cfg, log, schedule_rng, model,
            lambda code: subject.epoch_for_flash(intended, code),
        )
        correct = recognized == intended
        outcomes.append(correct)
        log.emit(
            "trial_result",
            recognized=recognized.label,
            intended=label,
            correct=correct,
        )
        _finish_trial_clock(cfg, log, base)
        streak = streak + 1 if correct else 0
        if streak >= VALIDATION_RUN_LENGTH:
            passed = True
            break
    log.emit(
        "validation",
        passed=passed,
        n_trials=len(outcomes),
        outcomes=outcomes,
    )
    log.emit("session_end", phase="validation", n_selections=len(outcomes))
    if own_log:
        log.close()
    return ValidationResult(passed, len(outcomes), outcomes, log.events)


def _make_policy(cfg: SessionConfig):
    if cfg.mode in ("task1_chat", "task1_letter_only"):
        return CopySpellPolicy(cfg.target, use_suggestions=not cfg.letter_only)
    if cfg.mode == "task2_improvise":
        return ImprovisePolicy(cfg.improvise_first_letter, cfg.improvise_n_words)
    raise ParameterError(f"mode {cfg.mode} has no scripted policy")


def _make_engine(cfg: SessionConfig) -> SuggestionEngine | None:
    if cfg.letter_only:
        return None
    provider = make_provider(
        cfg.provider,
        remote_base_url=cfg.remote_base_url or "",
        remote_model=cfg.remote_model or "",
        target=cfg.target or "",
    )
    return SuggestionEngine(provider)


def run_online(
    cfg: SessionConfig,
    model: TrainedModel,
    log: EventLog | None = None,
    engine: SuggestionEngine | None = None,
    policy=None,
    subject=None,
) -> OnlineResult:
    """The spelling loop: freeze suggestions, flash, recognize, apply, repeat.

    Ends when En is recognized or the selection cap truncates the session.
    Letter-only mode never queries suggestions and keeps every slot empty.
    """
    own_log = log is None
    log = log or EventLog(cfg.log_path)
    _start(cfg, log, "online")
    log.emit("model", payload=model_to_payload(model))
    subject = subject or SyntheticSubject(cfg.subject)
    schedule_rng = np.random.default_rng(cfg.seed + 2)
    engine = engine if engine is not None else _make_engine(cfg)
    policy = policy if policy is not None else _make_policy(cfg)
    state = CompositionState()
    truncated = False
    n_sel = 0
    while not state.finished:
        if n_sel >= cfg.max_selections:
            truncated = True
            break
        if engine is not None:
            suggestion_set = engine.get(state.composed)
            state = state.with_slots(suggestion_set.slots)
            log.emit(
                "suggestions",
                slots=list(suggestion_set.slots),
                provenance=suggestion_set.provenance,
                queried_with=suggestion_set.queried_with,
            )
        intended = policy.next_key(state)
        base = log.t_ms
        recognized = _run_trial(
            cfg, log, schedule_rng, model,
            lambda code: subject.epoch_for_flash(intended, code),
        )
        correct = recognized == intended
        log.emit(
            "trial_result",
            recognized=recognized.label,
            intended=intended.label,
            correct=correct,
        )
        state = apply_key(state, recognized)
        log.emit("compose", composed=state.composed, finished=state.finished)
        _finish_trial_clock(cfg, log, base)
        n_sel += 1
    log.emit(
        "session_end",
        phase="online",
        n_selections=n_sel,
        truncated=truncated,
    )
    record = record_from_log_events(log.events, label=cfg.mode)
    if own_log:
        log.close()
    return OnlineResult(record, state, truncated, log.events)


@dataclass
class FullSessionResult:
    calibration: CalibrationResult
    validation: ValidationResult
    online: OnlineResult | None
    events: list[dict]


def run_session(cfg: SessionConfig, require_validation: bool = True) -> FullSessionResult:
    """Calibrate, validate, then spell, on one continuous virtual clock."""
    log = EventLog(cfg.log_path)
    try:
        calibration = run_calibration(cfg, log)
        validation = run_validation(cfg, calibration.model, log)
        online = None
        if validation.passed or not require_validation:
            online = run_online(cfg, calibration.model, log)
    finally:
        log.close()
    return FullSessionResult(calibration, validation, online, log.events)


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


def replay_selections(events: Iterable[dict]) -> list[dict]:
    """Recompute every selection from logged features and the logged model.

    Returns one dict per trial with the recomputed and the logged key; the
    log is deterministic, so both always agree for an untampered file.
    """
    layout = KeyboardLayout()
    model: TrainedModel | None = None
    n_sequences = SEQUENCES_DEFAULT
    results: list[dict] = []
    pending_scores: np.ndarray | None = None
    cumulative: np.ndarray | None = None
    saw_features = False
    for ev in events:
        kind = ev.get("event")
        if kind == "session_start":
            n_sequences = ev.get("n_sequences", SEQUENCES_DEFAULT)
        elif kind == "model":
            model = model_from_payload(ev["payload"])
        elif kind == "flash" and "features" in ev:
            saw_features = True
            if model is None:
                raise InputError("flash features precede the model event")
            if pending_scores is None:
                pending_scores = np.zeros(13)
                if cumulative is None:
                    cumulative = np.zeros(13)
            features = np.asarray(ev["features"], dtype=np.float64)
            pending_scores[ev["code"] - 1] = score_rows(model, features[None, :])[0]
        elif kind == "score":
            if pending_scores is not None:
                cumulative = cumulative + pending_scores
                pending_scores = np.zeros(13)
        elif kind == "trial_result":
            if not saw_features:
                continue
            if cumulative is None:
                raise InputError("trial_result without preceding flash features")
            col = int(np.argmax(cumulative[:8])) + 1
            row = int(np.argmax(cumulative[8:13])) + 9
            recomputed = layout.key_for_codes(col, row).label
            results.append(
                {
                    "recomputed": recomputed,
                    "logged": ev["recognized"],
                    "match": recomputed == ev["recognized"],
                }
            )
            pending_scores = None
            cumulative = None
            saw_features = False
    if not results:
        raise InputError("log holds no replayable trials (were features logged?)")
    return results


def replay_log(path: str) -> list[dict]:
    return replay_selections(read_log(path))
