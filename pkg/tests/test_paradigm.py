"""Flash scheduling, accumulation, recognition, virtual-clock arithmetic.

Timing oracle (hand arithmetic): one flash slot is 40 + 100 = 140 ms, one
sequence is 13 * 140 + 1000 = 2820 ms, a default selection is
2000 + 8 * 2820 = 24560 ms = 24.56 s.
"""

import numpy as np
import pytest

from p300speller.errors import InputError, OverflowError_, ParameterError
from p300speller.paradigm import (
    COLUMN_CODES,
    N_CODES,
    ROW_CODES,
    FlashSchedule,
    SelectionTrial,
    TimingParams,
    accumulate,
    flash_events,
    make_schedule,
    recognize,
    schedule_duration,
    sequence_span_ms,
    trial_duration_ms,
)


class TestTiming:
    def test_default_selection_duration(self):
        sched = make_schedule(0)
        assert trial_duration_ms(sched) == 24560
        assert schedule_duration(sched) == 24.56

    def test_zero_sequences_only_pause(self):
        sched = make_schedule(0, n_sequences=0)
        assert schedule_duration(sched) == 2.0

    def test_single_sequence_no_pause(self):
        timing = TimingParams(post_selection_ms=0)
        sched = make_schedule(0, n_sequences=1, timing=timing)
        assert schedule_duration(sched) == 2.82

    def test_sequence_span(self):
        assert sequence_span_ms(TimingParams()) == 2820

    def test_validation(self):
        with pytest.raises(ParameterError):
            TimingParams(flash_ms=0)
        with pytest.raises(ParameterError):
            TimingParams(post_selection_ms=-1)


class TestSchedule:
    def test_each_sequence_is_a_permutation(self):
        sched = make_schedule(123)
        assert sched.n_sequences == 8
        for seq in sched.sequences:
            assert sorted(seq) == list(range(1, N_CODES + 1))

    def test_deterministic_by_seed(self):
        assert make_schedule(7).sequences == make_schedule(7).sequences

    def test_seeds_differ(self):
        assert make_schedule(0).sequences != make_schedule(1).sequences

    def test_rejects_non_permutation(self):
        with pytest.raises(InputError):
            FlashSchedule(((1,) * 13,))

    def test_code_ranges(self):
        assert COLUMN_CODES == (1, 2, 3, 4, 5, 6, 7, 8)
        assert ROW_CODES == (9, 10, 11, 12, 13)


class TestFlashEvents:
    def test_event_grid(self):
        sched = make_schedule(5)
        events = flash_events(sched)
        assert len(events) == 8 * 13
        first = events[0]
        assert (first.on_ms, first.off_ms) == (0, 40)
        assert events[1].on_ms == 140
        # second sequence starts one full span later
        assert events[13].on_ms == 2820
        assert events[13].sequence == 1

    def test_onsets_strictly_increase(self):
        events = flash_events(make_schedule(6))
        onsets = [e.on_ms for e in events]
        assert onsets == sorted(onsets)
        assert len(set(onsets)) == len(onsets)

    def test_codes_follow_schedule(self):
        sched = make_schedule(9)
        events = flash_events(sched)
        for event in events:
            assert sched.sequences[event.sequence][event.position] == event.code


class TestAccumulation:
    def test_cumulative_is_the_sum(self):
        rng = np.random.default_rng(0)
        trial = SelectionTrial(make_schedule(1))
        rows = [rng.normal(size=N_CODES) for _ in range(8)]
        for row in rows:
            accumulate(trial, row)
        assert trial.complete
        np.testing.assert_allclose(trial.cumulative, np.sum(rows, axis=0))

    def test_overflow_on_ninth_repetition(self):
        trial = SelectionTrial(make_schedule(1))
        for _ in range(8):
            accumulate(trial, np.zeros(N_CODES))
        with pytest.raises(OverflowError_):
            accumulate(trial, np.zeros(N_CODES))

    def test_wrong_length_rejected(self):
        trial = SelectionTrial(make_schedule(1))
        with pytest.raises(InputError):
            accumulate(trial, np.zeros(5))


class TestRecognition:
    def trial_with(self, col_code, row_code, base=0.0):
        trial = SelectionTrial(make_schedule(2))
        scores = np.full(N_CODES, base)
        scores[col_code - 1] = base + 1.0
        scores[row_code - 1] = base + 1.0
        accumulate(trial, scores)
        return trial

    def test_argmax_crossing(self):
        assert recognize(self.trial_with(6, 11)) == (6, 11)
        assert recognize(self.trial_with(1, 9)) == (1, 9)
        assert recognize(self.trial_with(8, 13)) == (8, 13)

    def test_ties_take_the_lower_code(self):
        trial = SelectionTrial(make_schedule(2))
        scores = np.zeros(N_CODES)
        scores[[1, 2]] = 2.0     # codes 2 and 3 tie
        scores[[9, 11]] = 2.0    # codes 10 and 12 tie
        accumulate(trial, scores)
        assert recognize(trial) == (2, 10)

    def test_recognition_before_any_scores(self):
        with pytest.raises(InputError):
            recognize(SelectionTrial(make_schedule(2)))

    def test_positive_affine_invariance(self):
        # a * s + b with a > 0 applied to every score leaves the choice alone
        rng = np.random.default_rng(33)
        for _ in range(20):
            rows = rng.normal(size=(8, N_CODES))
            a = float(rng.uniform(0.1, 10.0))
            b = float(rng.normal() * 5)
            plain = SelectionTrial(make_schedule(3))
            mapped = SelectionTrial(make_schedule(3))
            for row in rows:
                accumulate(plain, row)
                accumulate(mapped, a * row + b)
            assert recognize(plain) == recognize(mapped)

    def test_partial_accumulation_is_allowed(self):
        trial = self.trial_with(4, 12)
        assert not trial.complete
        assert recognize(trial) == (4, 12)
