"""Epoch generator morphology/labels and the intention policies."""

import numpy as np
import pytest

from p300speller.composer import CompositionState, Key, KeyboardLayout, apply_key
from p300speller.errors import ParameterError, PolicyExhaustedError
from p300speller.signals import CHANNEL_NAMES, EPOCH_SAMPLES
from p300speller.subject import (
    CopySpellPolicy,
    ImprovisePolicy,
    ScriptedPolicy,
    SubjectParams,
    SyntheticSubject,
    generate_epoch,
    p300_template,
    topography_weights,
)
from p300speller.suggestions import (
    MockWordPredictor,
    OracleWordProvider,
    SuggestionEngine,
)

LAYOUT = KeyboardLayout()
PZ = CHANNEL_NAMES.index("Pz")
TARGET = "I WOULD LIKE TO HAVE WATER"


def drive(policy, engine=None, max_steps=60):
    """Session-shaped loop: freeze slots, pick a key, apply, re-query."""
    state = CompositionState()
    if engine is not None:
        state = state.with_slots(engine.get(state.composed).slots)
    keys = []
    while not state.finished and len(keys) < max_steps:
        key = policy.next_key(state)
        keys.append(key)
        state = apply_key(state, key)
        if engine is not None and not state.finished:
            state = state.with_slots(engine.get(state.composed).slots)
    return state, keys


class TestParams:
    def test_validation(self):
        with pytest.raises(ParameterError):
            SubjectParams(p300_amplitude=-1.0)
        with pytest.raises(ParameterError):
            SubjectParams(lapse_prob=1.5)
        with pytest.raises(ParameterError):
            SubjectParams(noise_sigma=0.0)
        with pytest.raises(ParameterError):
            SubjectParams(p300_width_ms=0.0)


class TestTemplate:
    def test_peak_at_latency_on_pz(self):
        tpl = p300_template(SubjectParams(p300_amplitude=5.0))
        # 300 ms at 250 Hz is sample 75
        assert abs(int(np.argmax(tpl[PZ])) - 75) <= 1
        assert tpl[PZ].max() == pytest.approx(5.0, rel=1e-6)

    def test_topography_ordering(self):
        tpl = p300_template(SubjectParams(p300_amplitude=2.0))
        peaks = tpl.max(axis=1)
        w = topography_weights()
        assert np.argmax(peaks) == PZ
        np.testing.assert_allclose(peaks, 2.0 * w, rtol=1e-9)
        assert w[CHANNEL_NAMES.index("Cz")] == 0.8
        assert w[CHANNEL_NAMES.index("CP1")] == 0.8
        assert w[CHANNEL_NAMES.index("Fz")] == 0.3


class TestGenerateEpoch:
    def test_labels_follow_row_and_column(self):
        params = SubjectParams(seed=1)
        rng = np.random.default_rng(1)
        q_codes = LAYOUT.codes_for(Key.letter("Q"))  # column 6, row code 11
        for code in range(1, 14):
            ep = generate_epoch(params, Key.letter("Q"), code, rng, LAYOUT)
            want = "target" if code in q_codes else "nontarget"
            assert ep.label == want, code
            assert ep.stimulus_code == code
            assert ep.data.shape == (len(CHANNEL_NAMES), EPOCH_SAMPLES)

    def test_low_noise_peak_lands_on_latency(self):
        params = SubjectParams(p300_amplitude=5.0, noise_sigma=1e-6)
        rng = np.random.default_rng(0)
        code = LAYOUT.codes_for(Key.letter("Q"))[0]
        ep = generate_epoch(params, Key.letter("Q"), code, rng, LAYOUT)
        assert abs(int(np.argmax(ep.data[PZ])) - 75) <= 1

    def test_zero_amplitude_leaves_pure_noise(self):
        params = SubjectParams(p300_amplitude=0.0, noise_sigma=1.0, seed=3)
        subj = SyntheticSubject(params)
        code = LAYOUT.codes_for(Key.letter("Q"))[0]
        tmeans, nmeans = [], []
        for _ in range(300):
            tmeans.append(subj.epoch_for_flash(Key.letter("Q"), code).data[PZ, 70:80].mean())
            nmeans.append(subj.epoch_for_flash(Key.letter("Q"), 1).data[PZ, 70:80].mean())
        # both are zero-mean noise around the would-be peak
        assert abs(np.mean(tmeans)) < 0.1
        assert abs(np.mean(nmeans)) < 0.1

    def test_full_lapse_suppresses_template(self):
        code = LAYOUT.codes_for(Key.letter("Q"))[0]
        lapsing = SyntheticSubject(SubjectParams(p300_amplitude=50.0, lapse_prob=1.0, seed=4))
        awake = SyntheticSubject(SubjectParams(p300_amplitude=50.0, lapse_prob=0.0, seed=4))
        lapse_avg = np.mean(
            [lapsing.epoch_for_flash(Key.letter("Q"), code).data[PZ, 75] for _ in range(100)]
        )
        awake_avg = np.mean(
            [awake.epoch_for_flash(Key.letter("Q"), code).data[PZ, 75] for _ in range(100)]
        )
        assert abs(lapse_avg) < 2.0
        assert awake_avg > 40.0

    def test_seeded_reproducibility(self):
        a = SyntheticSubject(SubjectParams(seed=9))
        b = SyntheticSubject(SubjectParams(seed=9))
        for code in (1, 11, 6, 9):
            ea = a.epoch_for_flash(Key.letter("Q"), code)
            eb = b.epoch_for_flash(Key.letter("Q"), code)
            np.testing.assert_array_equal(ea.data, eb.data)


def state(composed, slots=()):
    full = tuple(slots) + ("",) * (10 - len(slots))
    return CompositionState(composed=composed, slots=full)


class TestCopySpellPolicy:
    def test_next_letter_and_space_on_track(self):
        policy = CopySpellPolicy(TARGET)
        assert policy.next_key(state("I ")) == Key.letter("W")
        assert policy.next_key(state("I WOULD")) == Key.function("Sp")
        assert policy.next_key(state("")) == Key.letter("I")

    def test_selects_slot_containing_next_word(self):
        policy = CopySpellPolicy(TARGET)
        st = state("I WOULD ", slots=("BE", "LIKE", "LOVE"))
        assert policy.next_key(st) == Key.slot(1)

    def test_prefers_slot_gaining_most_characters(self):
        policy = CopySpellPolicy(TARGET)
        st = state("I WOULD ", slots=("LIKE", "LIKE TO HAVE"))
        assert policy.next_key(st) == Key.slot(1)

    def test_slot_completing_current_fragment(self):
        policy = CopySpellPolicy(TARGET)
        st = state("I WOU", slots=("WOULD",))
        assert policy.next_key(st) == Key.slot(0)

    def test_slot_never_taken_off_target(self):
        policy = CopySpellPolicy(TARGET)
        st = state("I WOULD ", slots=("LOVE", "WISH"))
        assert policy.next_key(st) == Key.letter("L")

    def test_slot_repairs_divergence_when_possible(self):
        policy = CopySpellPolicy("I WANT TO BE")
        st = state("I WAM", slots=("WANT",))
        assert policy.next_key(st) == Key.slot(0)

    def test_character_recovery_uses_delete_character(self):
        # one wrong letter near the end: backspacing beats wiping the word
        policy = CopySpellPolicy("I WANT TO BE")
        assert policy.next_key(state("I WAMT")) == Key.function("DC")

    def test_word_recovery_uses_delete_word(self):
        # fragment wrong almost from its start: wiping the word is cheaper
        policy = CopySpellPolicy("I WANT TO BE")
        assert policy.next_key(state("IXQ")) == Key.function("DW")

    def test_finished_target_selects_enter(self):
        policy = CopySpellPolicy(TARGET)
        assert policy.next_key(state(TARGET)) == Key.function("En")
        assert policy.next_key(state(TARGET + " ")) == Key.function("En")

    def test_full_oracle_walkthrough_word_per_selection(self):
        engine = SuggestionEngine(OracleWordProvider(TARGET))
        final, keys = drive(CopySpellPolicy(TARGET), engine)
        assert final.finished
        assert final.composed.rstrip(" ") == TARGET
        assert len(keys) == 7  # six word slots + En
        assert all(k.kind == "slot" for k in keys[:-1])
        assert keys[-1] == Key.function("En")

    def test_completion_oracle_two_keystrokes_per_word(self):
        engine = SuggestionEngine(OracleWordProvider(TARGET, completion_only=True))
        final, keys = drive(CopySpellPolicy(TARGET), engine)
        assert final.finished
        assert final.composed.rstrip(" ") == TARGET
        # letter + completion slot per word, then En
        assert len(keys) == 2 * len(TARGET.split()) + 1
        kinds = [k.kind for k in keys[:-1]]
        assert kinds == ["letter", "slot"] * len(TARGET.split())

    def test_letter_only_spells_every_character(self):
        final, keys = drive(CopySpellPolicy(TARGET, use_suggestions=False), engine=None)
        assert final.finished
        assert final.composed == TARGET
        assert len(keys) == len(TARGET) + 1

    def test_recovers_inside_full_loop(self):
        # inject one wrong selection, then let the policy clean up
        engine = SuggestionEngine(OracleWordProvider(TARGET, completion_only=True))
        policy = CopySpellPolicy(TARGET)
        st = state("I WAMT")  # as if 'M' got recognized instead of 'N'
        steps = 0
        while not st.finished and steps < 40:
            st = st.with_slots(engine.get(st.composed).slots)
            st = apply_key(st, policy.next_key(st))
            steps += 1
        assert st.finished and st.composed.rstrip(" ") == TARGET

    def test_target_validation(self):
        with pytest.raises(ParameterError):
            CopySpellPolicy("")
        with pytest.raises(ParameterError):
            CopySpellPolicy("DOUBLE  SPACE")
        assert CopySpellPolicy("I-WOULD-LIKE").target == "I WOULD LIKE"


class TestScriptedPolicy:
    def test_plays_then_exhausts(self):
        keys = [Key.letter("H"), Key.function("Sp"), Key.function("En")]
        policy = ScriptedPolicy(keys)
        st = CompositionState()
        for want in keys:
            got = policy.next_key(st)
            assert got == want
            st = apply_key(st, got)
        assert st.finished and st.composed == "H "
        with pytest.raises(PolicyExhaustedError):
            policy.next_key(st)


class TestImprovisePolicy:
    def test_every_word_after_seed_letter_comes_from_slots(self):
        engine = SuggestionEngine(MockWordPredictor())
        final, keys = drive(ImprovisePolicy(first_letter="I", n_words=5), engine)
        assert final.finished
        words = final.composed.split()
        assert len(words) == 5
        assert keys[0] == Key.letter("I")
        assert keys[-1] == Key.function("En")
        assert all(k.kind == "slot" for k in keys[1:-1])
