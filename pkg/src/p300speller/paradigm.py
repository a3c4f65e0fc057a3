"""Row/column flash scheduling, score accumulation and selection.

The 5 x 8 keyboard flashes one column or one row at a time.  Stimulus codes
1..8 are columns left to right, 9..13 are rows top to bottom, so one sequence
is a random permutation of all 13 codes and one selection runs several
sequences (8 by default).  Every flash yields a classifier score; scores
accumulate per code across sequences and the selected cell is the argmax
column crossed with the argmax row.

All scheduling is integer milliseconds on a virtual clock: a flash occupies
flash_ms lit plus isi_ms dark, sequences are separated by inter_sequence_ms,
and a selection ends with post_selection_ms of feedback pause.  With the
defaults this is 2 + (0.140 * 13 + 1) * 8 = 24.56 s per selection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, OverflowError_, ParameterError

N_GRID_ROWS = 5
N_GRID_COLS = 8
N_CODES = N_GRID_ROWS + N_GRID_COLS          # 13 flashes per sequence
COLUMN_CODES = tuple(range(1, N_GRID_COLS + 1))          # 1..8
ROW_CODES = tuple(range(N_GRID_COLS + 1, N_CODES + 1))   # 9..13
SEQUENCES_DEFAULT = 8


@dataclass(frozen=True)
class TimingParams:
    """Stimulus timing in integer milliseconds."""

    flash_ms: int = 40
    isi_ms: int = 100
    inter_sequence_ms: int = 1000
    post_selection_ms: int = 2000

    def __post_init__(self):
        if self.flash_ms <= 0 or self.isi_ms < 0:
            raise ParameterError(f"flash/isi must be positive, got {self.flash_ms}/{self.isi_ms}")
        if self.inter_sequence_ms < 0 or self.post_selection_ms < 0:
            raise ParameterError("inter-sequence and post-selection pauses must be >= 0")

    @property
    def soa_ms(self) -> int:
        """Onset-to-onset interval of consecutive flashes."""
        return self.flash_ms + self.isi_ms


@dataclass(frozen=True)
class FlashEvent:
    """One flash of a schedule: position within the trial, virtual-clock ms."""

    sequence: int
    position: int
    code: int
    on_ms: int
    off_ms: int


@dataclass(frozen=True)
class FlashSchedule:
    """The full flash order of one selection: n sequences x 13 codes."""

    sequences: tuple[tuple[int, ...], ...]
    timing: TimingParams = field(default_factory=TimingParams)

    def __post_init__(self):
        expected = sorted(range(1, N_CODES + 1))
        for i, seq in enumerate(self.sequences):
            if sorted(seq) != expected:
                raise InputError(f"sequence {i} is not a permutation of 1..{N_CODES}: {seq}")

    @property
    def n_sequences(self) -> int:
        return len(self.sequences)


def make_schedule(
    seed: int | np.random.Generator,
    n_sequences: int = SEQUENCES_DEFAULT,
    timing: TimingParams | None = None,
) -> FlashSchedule:
    """Draw n_sequences independent permutations of the 13 codes."""
    if n_sequences < 0:
        raise ParameterError(f"n_sequences must be >= 0, got {n_sequences}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    seqs = tuple(
        tuple(int(c) for c in rng.permutation(np.arange(1, N_CODES + 1)))
        for _ in range(n_sequences)
    )
    return FlashSchedule(seqs, timing or TimingParams())


def sequence_span_ms(timing: TimingParams) -> int:
    """One sequence's footprint: 13 flash slots plus the inter-sequence gap."""
    return N_CODES * timing.soa_ms + timing.inter_sequence_ms


def selection_duration_ms(timing: TimingParams, n_sequences: int = SEQUENCES_DEFAULT) -> int:
    """Whole-selection duration including the post-selection pause."""
    return n_sequences * sequence_span_ms(timing) + timing.post_selection_ms


def trial_duration_ms(schedule: FlashSchedule) -> int:
    """selection_duration_ms for a concrete schedule."""
    return selection_duration_ms(schedule.timing, schedule.n_sequences)


def schedule_duration(schedule: FlashSchedule) -> float:
    """trial_duration_ms in seconds; 24.56 with the default parameters."""
    return trial_duration_ms(schedule) / 1000.0


def flash_events(schedule: FlashSchedule) -> tuple[FlashEvent, ...]:
    """Every flash with on/off times relative to the trial's first flash."""
    timing = schedule.timing
    span = sequence_span_ms(timing)
    events = []
    for s, seq in enumerate(schedule.sequences):
        base = s * span
        for j, code in enumerate(seq):
            on = base + j * timing.soa_ms
            events.append(FlashEvent(s, j, code, on, on + timing.flash_ms))
    return tuple(events)


@dataclass
class SelectionTrial:
    """Accumulates one repetition of 13 scores at a time until recognition."""

    schedule: FlashSchedule
    repetitions: list = field(default_factory=list)
    cumulative: np.ndarray = field(default_factory=lambda: np.zeros(N_CODES))

    def __post_init__(self):
        self.cumulative = np.asarray(self.cumulative, dtype=np.float64)
        if self.cumulative.shape != (N_CODES,):
            raise InputError(f"cumulative must have {N_CODES} entries")

    @property
    def n_accumulated(self) -> int:
        return len(self.repetitions)

    @property
    def complete(self) -> bool:
        return self.n_accumulated == self.schedule.n_sequences


def accumulate(trial: SelectionTrial, scores_by_code: np.ndarray) -> None:
    """Add one sequence's scores, indexed by code - 1."""
    scores = np.asarray(scores_by_code, dtype=np.float64)
    if scores.shape != (N_CODES,):
        raise InputError(f"expected {N_CODES} scores, got shape {scores.shape}")
    if trial.n_accumulated >= trial.schedule.n_sequences:
        raise OverflowError_(
            f"schedule has {trial.schedule.n_sequences} sequences, all already accumulated"
        )
    trial.repetitions.append(scores.copy())
    trial.cumulative = trial.cumulative + scores


def recognize(trial: SelectionTrial) -> tuple[int, int]:
    """Argmax column code and row code of the accumulated scores.

    Ties break toward the lower code (np.argmax returns the first maximum).
    Valid on any number of accumulated repetitions >= 1.
    """
    if trial.n_accumulated == 0:
        raise InputError("cannot recognize before any scores were accumulated")
    col = int(np.argmax(trial.cumulative[: N_GRID_COLS])) + 1
    row = int(np.argmax(trial.cumulative[N_GRID_COLS:])) + N_GRID_COLS + 1
    return col, row
