"""Evaluation metrics: transfer rates, keystroke savings, session reports.

Two families of numbers come out of a spelling run:

* rate metrics — bits per selection for an N-way choice made with
  probability P of success, scaled to bits/min and weighted by the mean
  characters produced per selection (``itr_star``); the second variant
  widens the choice count by the character mass of the displayed
  suggestions (``itr_star_2``);
* keystroke metrics — how many selections actually advanced the sentence,
  against the letter-by-letter baseline and against the two theoretical
  floors (two keystrokes per word for pure completion, one per word for
  pure prediction), plus the deficit ratio measuring the gap to the
  prediction floor.

Reports aggregate per-sentence rows with an average row and render as
aligned text, CSV, or JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

from .errors import InputError, ParameterError, UndefinedRateError
from .paradigm import SEQUENCES_DEFAULT, TimingParams, selection_duration_ms

# Selectable outcomes that produce text: 26 letters + space + enter.
N_BASE_CHOICES = 28


def default_selection_seconds() -> float:
    """Duration of one selection with default timing: 24.56 s."""
    return selection_duration_ms(TimingParams(), SEQUENCES_DEFAULT) / 1000.0


# ---------------------------------------------------------------------------
# Rate metrics
# ---------------------------------------------------------------------------


def itr_bits_per_selection(p_correct: float, n_choices: float) -> float:
    """Information carried by one N-way selection made correctly with prob P.

    The P=1 limit evaluates to log2(N); P=0 has no defined rate.
    """
    if n_choices < 2:
        raise ParameterError(f"need at least 2 choices, got {n_choices}")
    if p_correct == 0:
        raise UndefinedRateError("rate undefined at zero success probability")
    if not 0 < p_correct <= 1:
        raise ParameterError(f"success probability must be in (0, 1], got {p_correct}")
    if p_correct == 1.0:
        return math.log2(n_choices)
    wrong = 1.0 - p_correct
    return (
        wrong * math.log2(wrong / (n_choices - 1))
        + p_correct * math.log2(p_correct)
        + math.log2(n_choices)
    )


def itr_star(
    bits_per_selection: float, t_selection_s: float, chars_per_selection: float
) -> float:
    """Character-weighted transfer rate in bits/min.

    chars_per_selection is the sentence's character count divided by the
    selections spent producing it, so multi-character selections (word
    slots) raise the rate above the per-selection baseline.
    """
    if t_selection_s <= 0:
        raise ParameterError(f"selection time must be > 0, got {t_selection_s}")
    if chars_per_selection <= 0:
        raise ParameterError(
            f"chars per selection must be > 0, got {chars_per_selection}"
        )
    return bits_per_selection / (t_selection_s / 60.0) * chars_per_selection


def suggestion_augmented_choices(mean_suggestion_chars: float) -> float:
    """Widened choice count: base keys plus the displayed suggestion mass."""
    if mean_suggestion_chars < 0:
        raise ParameterError(
            f"mean suggestion chars must be >= 0, got {mean_suggestion_chars}"
        )
    return N_BASE_CHOICES + mean_suggestion_chars


# ---------------------------------------------------------------------------
# Keystroke metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KeystrokeSavings:
    ks_pct: float
    ks_wc_max_pct: float
    ks_wp_max_pct: float
    ks_dr_pct: float


def keystroke_metrics(n_chars: int, n_words: int, n_keystrokes: int) -> KeystrokeSavings:
    """Savings against letter-by-letter typing and the two theoretical floors.

    With C characters (spaces included), W words and K effective keystrokes:
    savings = (C-K)/C; the completion floor spends two keystrokes per word
    (first letter + completion slot) and the prediction floor one (slot
    only); the deficit ratio is the shortfall from the prediction floor.
    """
    if n_chars <= 0:
        raise UndefinedRateError("keystroke savings undefined for an empty sentence")
    if n_words < 1 or n_keystrokes < 0:
        raise ParameterError(
            f"need n_words >= 1 and n_keystrokes >= 0, got {n_words}, {n_keystrokes}"
        )
    ks = (n_chars - n_keystrokes) / n_chars * 100.0
    wc_max = (n_chars - 2 * n_words) / n_chars * 100.0
    wp_max = (n_chars - n_words) / n_chars * 100.0
    if wp_max == 0:
        raise UndefinedRateError("deficit ratio undefined when the prediction floor is zero")
    ks_dr = (1.0 - ks / wp_max) * 100.0
    return KeystrokeSavings(ks, wc_max, wp_max, ks_dr)


def _lcp_len(a: str, b: str) -> int:
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return i
    return n


def effective_keystrokes(composed_steps: Iterable[str], target: str) -> int:
    """Selections that extended the longest matched prefix of the target.

    The match ratchets: only a selection pushing the matched-prefix length
    past its best value so far counts, so corrections and the re-typing they
    force contribute nothing.
    """
    target = target.rstrip(" ")
    if not target:
        raise InputError("target must be non-empty")
    best = 0
    count = 0
    for composed in composed_steps:
        cur = _lcp_len(composed, target)
        if cur > best:
            best = cur
            count += 1
    return count


# ---------------------------------------------------------------------------
# Sentence records and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Selection:
    """One recognized selection and the composition it produced."""

    key_label: str
    correct: bool
    composed_after: str
    slots_shown: tuple[str, ...] = ()


@dataclass(frozen=True)
class SentenceRecord:
    """Full trace of one spelled sentence."""

    final_composed: str
    selections: tuple[Selection, ...]
    target: str | None = None
    label: str = ""
    t_per_selection_s: float = 24.56

    def __post_init__(self):
        object.__setattr__(self, "selections", tuple(self.selections))
        if self.t_per_selection_s <= 0:
            raise ParameterError(
                f"selection time must be > 0, got {self.t_per_selection_s}"
            )

    @property
    def sentence(self) -> str:
        """The produced text without the trailing word-closing space."""
        return self.final_composed.rstrip(" ")


def success_rate_pct(composed: str, target: str) -> float:
    """Share of target positions carrying the correct character at the end."""
    target = target.rstrip(" ")
    if not target:
        raise InputError("target must be non-empty")
    composed = composed.rstrip(" ")
    good = sum(
        1 for i in range(len(target)) if i < len(composed) and composed[i] == target[i]
    )
    return good / len(target) * 100.0


@dataclass(frozen=True)
class MetricsReport:
    """One report row; None marks a metric that does not apply to the run."""

    label: str
    n_char: int
    n_words: int
    n_selections: int
    n_keystrokes: int | None
    time_to_complete_min: float
    typing_speed_cpm: float
    selection_accuracy_pct: float | None
    success_rate_pct: float | None
    chars_per_selection: float
    mean_suggestion_chars: float | None
    itr_star_1_bits_per_min: float | None
    itr_star_2_bits_per_min: float | None
    ks_pct: float | None
    ks_wc_max_pct: float | None
    ks_wp_max_pct: float | None
    ks_dr_pct: float | None


def compute_report(
    *,
    label: str = "",
    n_char: int,
    n_words: int,
    n_selections: int,
    p_correct: float,
    t_selection_s: float | None = None,
    selection_accuracy_pct: float | None = None,
    success_rate_pct: float | None = None,
    mean_suggestion_chars: float | None = None,
    n_keystrokes: int | None = None,
) -> MetricsReport:
    """Assemble a report row from summary numbers.

    p_correct feeds the rate metrics: the end-of-run character accuracy for
    copy-spelling, 1.0 for free composition.  mean_suggestion_chars None
    means "not recorded" and suppresses the widened-choice rate.
    """
    if n_char <= 0 or n_selections <= 0:
        raise UndefinedRateError("report needs at least one character and one selection")
    t = default_selection_seconds() if t_selection_s is None else t_selection_s
    time_min = n_selections * t / 60.0
    alpha = n_char / n_selections
    # A run with zero success probability has no defined rate; those columns
    # become N/A rather than failing the whole report.
    itr_1 = itr_2 = None
    if p_correct > 0:
        itr_1 = itr_star(itr_bits_per_selection(p_correct, N_BASE_CHOICES), t, alpha)
        if mean_suggestion_chars is not None:
            n2 = suggestion_augmented_choices(mean_suggestion_chars)
            itr_2 = itr_star(itr_bits_per_selection(p_correct, n2), t, alpha)
    ks = wc = wp = dr = None
    if n_keystrokes is not None:
        saved = keystroke_metrics(n_char, n_words, n_keystrokes)
        ks, wc, wp, dr = saved.ks_pct, saved.ks_wc_max_pct, saved.ks_wp_max_pct, saved.ks_dr_pct
    return MetricsReport(
        label=label,
        n_char=n_char,
        n_words=n_words,
        n_selections=n_selections,
        n_keystrokes=n_keystrokes,
        time_to_complete_min=time_min,
        typing_speed_cpm=n_char / time_min,
        selection_accuracy_pct=selection_accuracy_pct,
        success_rate_pct=success_rate_pct,
        chars_per_selection=alpha,
        mean_suggestion_chars=mean_suggestion_chars,
        itr_star_1_bits_per_min=itr_1,
        itr_star_2_bits_per_min=itr_2,
        ks_pct=ks,
        ks_wc_max_pct=wc,
        ks_wp_max_pct=wp,
        ks_dr_pct=dr,
    )


def report_from_record(rec: SentenceRecord) -> MetricsReport:
    """Derive every applicable metric from a full sentence trace.

    Copy-spell runs (target present) use the end-of-run character accuracy
    as the rate metric's success probability; free composition uses 1.
    """
    sentence = rec.sentence
    if not sentence:
        raise UndefinedRateError("no text was produced")
    n_char = len(sentence)
    n_words = len(sentence.split())
    n_sel = len(rec.selections)
    if n_sel == 0:
        raise UndefinedRateError("record holds no selections")
    accuracy = sum(1 for s in rec.selections if s.correct) / n_sel * 100.0
    target = rec.target
    if target is not None:
        sr = success_rate_pct(rec.final_composed, target)
        p = sr / 100.0
    else:
        sr = None
        p = 1.0
    mean_chars = sum(
        sum(len(t) for t in s.slots_shown) for s in rec.selections
    ) / n_sel
    keystrokes = effective_keystrokes(
        (s.composed_after for s in rec.selections),
        target if target is not None else sentence,
    )
    return compute_report(
        label=rec.label,
        n_char=n_char,
        n_words=n_words,
        n_selections=n_sel,
        p_correct=p,
        t_selection_s=rec.t_per_selection_s,
        selection_accuracy_pct=accuracy,
        success_rate_pct=sr,
        mean_suggestion_chars=mean_chars,
        n_keystrokes=keystrokes,
    )


def record_from_log_events(
    events: Iterable[dict], label: str = ""
) -> SentenceRecord:
    """Rebuild a SentenceRecord from session-log.v1 event dicts.

    Uses session_start (target, trial duration), suggestions (the frozen
    slots), trial_result (recognized key and correctness), and compose (the
    text after applying the key).
    """
    target: str | None = None
    t_selection = default_selection_seconds()
    slots: tuple[str, ...] = ()
    selections: list[Selection] = []
    pending: dict | None = None
    final = ""
    for ev in events:
        kind = ev.get("event")
        if kind == "session_start":
            target = ev.get("target")
            if ev.get("selection_duration_ms"):
                t_selection = ev["selection_duration_ms"] / 1000.0
        elif kind == "suggestions":
            slots = tuple(ev["slots"])
        elif kind == "trial_result":
            pending = ev
        elif kind == "compose":
            final = ev["composed"]
            if pending is not None:
                selections.append(
                    Selection(
                        key_label=pending["recognized"],
                        correct=bool(pending.get("correct")),
                        composed_after=ev["composed"],
                        slots_shown=slots,
                    )
                )
                pending = None
    if not selections:
        raise InputError("log holds no completed selections")
    return SentenceRecord(
        final_composed=final,
        selections=tuple(selections),
        target=target,
        label=label,
        t_per_selection_s=t_selection,
    )


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

_COUNT_COLS = {"n_char", "n_words", "n_selections", "n_keystrokes"}


def _column_names() -> list[str]:
    return [f.name for f in fields(MetricsReport)]


def average_report(rows: Sequence[MetricsReport]) -> MetricsReport:
    """Column-wise mean over the rows; counts are rounded up for display.

    A column's mean skips rows where the metric did not apply; it is None
    only when no row carried it.
    """
    if not rows:
        raise InputError("need at least one row to average")
    values: dict[str, object] = {"label": "Average"}
    for name in _column_names()[1:]:
        present = [getattr(r, name) for r in rows if getattr(r, name) is not None]
        if not present:
            values[name] = None
        elif name in _COUNT_COLS:
            values[name] = math.ceil(sum(present) / len(present))
        else:
            values[name] = sum(present) / len(present)
    return MetricsReport(**values)


def _cell(value) -> str:
    if value is None:
        return "N/A"
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)


def emit_report(rows: Sequence[MetricsReport], fmt: str = "text") -> str:
    """Render rows plus an average row as aligned text, CSV, or JSON."""
    if not rows:
        raise InputError("need at least one row to report")
    all_rows = list(rows)
    if len(all_rows) > 1:
        all_rows.append(average_report(rows))
    names = _column_names()
    if fmt == "json":
        payload = [
            {n: getattr(r, n) for n in names} for r in all_rows
        ]
        return json.dumps(payload, indent=2)
    table = [names] + [[_cell(getattr(r, n)) for n in names] for r in all_rows]
    if fmt == "csv":
        buf = io.StringIO()
        csv.writer(buf).writerows(table)
        return buf.getvalue()
    if fmt == "text":
        widths = [max(len(row[i]) for row in table) for i in range(len(names))]
        lines = []
        for r, row in enumerate(table):
            lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
            if r == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"
    raise ParameterError(f"unknown report format {fmt!r}")
