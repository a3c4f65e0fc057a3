"""Rate/keystroke formulas against the reference dataset and hand oracles."""

import csv
import io
import json
import math

import pytest

from p300speller.errors import InputError, ParameterError, UndefinedRateError
from p300speller.metrics import (
    MetricsReport,
    N_BASE_CHOICES,
    Selection,
    SentenceRecord,
    average_report,
    compute_report,
    default_selection_seconds,
    effective_keystrokes,
    emit_report,
    itr_bits_per_selection,
    itr_star,
    keystroke_metrics,
    record_from_log_events,
    report_from_record,
    success_rate_pct,
    suggestion_augmented_choices,
)
from study_rows import (
    COPY_SPELL_AVERAGES,
    COPY_SPELL_ROWS,
    IMPROVISED_AVERAGES,
    IMPROVISED_ROWS,
    TOLERANCE,
    WALKTHROUGH,
)

T = default_selection_seconds()


def close(a, b, tol=TOLERANCE):
    assert b is not None and abs(a - b) <= tol, f"{a} vs {b}"


class TestBitsPerSelection:
    def test_perfect_selection_limit(self):
        assert itr_bits_per_selection(1.0, 28) == pytest.approx(math.log2(28))

    def test_coin_flip_carries_nothing(self):
        assert itr_bits_per_selection(0.5, 2) == pytest.approx(0.0, abs=1e-12)

    def test_undefined_and_invalid(self):
        with pytest.raises(UndefinedRateError):
            itr_bits_per_selection(0.0, 28)
        with pytest.raises(ParameterError):
            itr_bits_per_selection(1.1, 28)
        with pytest.raises(ParameterError):
            itr_bits_per_selection(0.5, 1)

    def test_strictly_increasing_in_p(self):
        n = 28
        grid = [1 / n + (1 - 1 / n) * k / 200 for k in range(1, 201)]
        vals = [itr_bits_per_selection(p, n) for p in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_continuous_at_one(self):
        assert itr_bits_per_selection(1 - 1e-12, 28) == pytest.approx(
            math.log2(28), abs=1e-9
        )


class TestRateScaling:
    def test_base_rate_with_default_timing(self):
        rate = itr_star(itr_bits_per_selection(1.0, 28), T, 1.0)
        assert rate == pytest.approx(11.7444, abs=5e-4)

    def test_unit_chars_per_selection_recovers_plain_rate(self):
        bits = itr_bits_per_selection(0.9, 28)
        assert itr_star(bits, 30.0, 1.0) == pytest.approx(bits * 2.0)

    def test_validation(self):
        with pytest.raises(ParameterError):
            itr_star(1.0, 0.0, 1.0)
        with pytest.raises(ParameterError):
            itr_star(1.0, 24.56, 0.0)

    def test_augmented_choices(self):
        assert suggestion_augmented_choices(0.0) == N_BASE_CHOICES
        assert suggestion_augmented_choices(41.52) == pytest.approx(69.52)
        with pytest.raises(ParameterError):
            suggestion_augmented_choices(-1.0)


class TestKeystrokeFormulas:
    def test_walkthrough_sentence(self):
        w = WALKTHROUGH
        got = keystroke_metrics(w["n_char"], w["n_words"], w["n_keystrokes"])
        close(got.ks_pct, w["ks_pct"])
        close(got.ks_wc_max_pct, w["ks_wc_max_pct"])
        close(got.ks_wp_max_pct, w["ks_wp_max_pct"])
        close(got.ks_dr_pct, w["ks_dr_pct"])

    def test_deficit_zero_iff_keystrokes_equal_words(self):
        at = keystroke_metrics(44, 7, 7)
        assert at.ks_dr_pct == pytest.approx(0.0, abs=1e-12)
        below = keystroke_metrics(87, 14, 13)
        assert below.ks_dr_pct < 0.0
        above = keystroke_metrics(44, 7, 8)
        assert above.ks_dr_pct > 0.0

    def test_prediction_floor_above_completion_floor(self):
        m = keystroke_metrics(26, 6, 10)
        assert m.ks_wp_max_pct > m.ks_wc_max_pct

    def test_undefined_cases(self):
        with pytest.raises(UndefinedRateError):
            keystroke_metrics(0, 1, 0)
        with pytest.raises(UndefinedRateError):
            keystroke_metrics(1, 1, 1)  # prediction floor collapses to zero


class TestEffectiveKeystrokes:
    TARGET = "I WOULD LIKE TO HAVE WATER"

    def test_clean_walkthrough_counts_every_step(self):
        steps = [
            "I", "I ", "I W", "I WOULD ", "I WOULD LIKE ",
            "I WOULD LIKE TO ", "I WOULD LIKE TO H", "I WOULD LIKE TO HAVE ",
            "I WOULD LIKE TO HAVE W", "I WOULD LIKE TO HAVE WATER ",
        ]
        assert effective_keystrokes(steps, self.TARGET) == 10

    def test_error_and_correction_count_nothing(self):
        steps = ["I", "I ", "I X", "I ", "I W"]
        assert effective_keystrokes(steps, self.TARGET) == 3

    def test_finishing_key_without_text_change_counts_nothing(self):
        steps = ["I", "I ", "I "]
        assert effective_keystrokes(steps, self.TARGET) == 2

    def test_word_wipe_retyping_not_double_counted(self):
        steps = ["I", "I ", "I W", "I WO", "I ", "I W", "I WO", "I WOU"]
        assert effective_keystrokes(steps, self.TARGET) == 5

    def test_empty_target_rejected(self):
        with pytest.raises(InputError):
            effective_keystrokes(["A"], "  ")


class TestSuccessRate:
    def test_exact_and_trailing_space(self):
        assert success_rate_pct("AB C", "AB C") == 100.0
        assert success_rate_pct("AB C ", "AB C") == 100.0

    def test_partial(self):
        # 16-char target with two wrong characters
        target = "I JUST HAD WATER"
        composed = "I JUST HAD WATEX"[:14] + "XX"
        assert success_rate_pct(composed, target) == pytest.approx(87.5)

    def test_short_composed_counts_missing_as_wrong(self):
        assert success_rate_pct("AB", "AB C") == pytest.approx(50.0)

    def test_empty_target_rejected(self):
        with pytest.raises(InputError):
            success_rate_pct("A", "")


class TestCopySpellRows:
    def test_sentences_are_internally_consistent(self):
        for row in COPY_SPELL_ROWS:
            text = row.sentence.replace("-", " ")
            assert len(text) == row.n_char, row.label
            assert len(text.split()) == row.n_words, row.label

    @pytest.mark.parametrize("row", COPY_SPELL_ROWS, ids=lambda r: r.label)
    def test_rates_reproduce(self, row):
        letter = compute_report(
            n_char=row.n_char, n_words=row.n_words,
            n_selections=row.n_sel_letter,
            p_correct=row.sr_letter_pct / 100.0,
        )
        suggest = compute_report(
            n_char=row.n_char, n_words=row.n_words,
            n_selections=row.n_sel_suggest,
            p_correct=row.sr_suggest_pct / 100.0,
            mean_suggestion_chars=row.mean_suggestion_chars,
            n_keystrokes=row.n_keystrokes,
        )
        if not row.rate_pair_swapped:
            close(letter.itr_star_1_bits_per_min, row.rate_letter)
            close(suggest.itr_star_1_bits_per_min, row.rate_suggest_1)
        if row.mean_suggestion_chars is None:
            assert suggest.itr_star_2_bits_per_min is None
            assert row.rate_suggest_2 is None
        else:
            close(suggest.itr_star_2_bits_per_min, row.rate_suggest_2)

    def test_swapped_rows_match_as_unordered_pairs(self):
        # Two rows' recorded rates were interchanged with each other; the
        # computed and recorded values agree as unordered column pairs.
        swapped = [r for r in COPY_SPELL_ROWS if r.rate_pair_swapped]
        assert len(swapped) == 2
        computed_letter, computed_suggest = [], []
        for row in swapped:
            computed_letter.append(itr_star(
                itr_bits_per_selection(row.sr_letter_pct / 100, N_BASE_CHOICES),
                T, row.n_char / row.n_sel_letter))
            computed_suggest.append(itr_star(
                itr_bits_per_selection(row.sr_suggest_pct / 100, N_BASE_CHOICES),
                T, row.n_char / row.n_sel_suggest))
        for c, p in zip(sorted(computed_letter), sorted(r.rate_letter for r in swapped)):
            close(c, p)
        for c, p in zip(sorted(computed_suggest), sorted(r.rate_suggest_1 for r in swapped)):
            close(c, p)
        # and each computed value matches the OTHER row's recorded cell
        close(computed_letter[0], swapped[1].rate_letter)
        close(computed_letter[1], swapped[0].rate_letter)
        close(computed_suggest[0], swapped[1].rate_suggest_1)
        close(computed_suggest[1], swapped[0].rate_suggest_1)

    @pytest.mark.parametrize("row", COPY_SPELL_ROWS, ids=lambda r: r.label)
    def test_keystroke_columns_reproduce(self, row):
        got = keystroke_metrics(row.n_char, row.n_words, row.n_keystrokes)
        close(got.ks_pct, row.ks_pct)
        close(got.ks_wc_max_pct, row.ks_wc_max_pct)
        close(got.ks_wp_max_pct, row.ks_wp_max_pct)
        close(got.ks_dr_pct, row.ks_dr_pct)

    def test_averages_reproduce(self):
        rows = COPY_SPELL_ROWS
        close(sum(r.rate_letter for r in rows) / 7, COPY_SPELL_AVERAGES["rate_letter"])
        close(sum(r.rate_suggest_1 for r in rows) / 7, COPY_SPELL_AVERAGES["rate_suggest_1"])
        with_m = [r for r in rows if r.mean_suggestion_chars is not None]
        assert len(with_m) == 6
        close(sum(r.rate_suggest_2 for r in with_m) / 6, COPY_SPELL_AVERAGES["rate_suggest_2"])
        close(sum(r.mean_suggestion_chars for r in with_m) / 6,
              COPY_SPELL_AVERAGES["mean_suggestion_chars"])
        for col in ("ks_pct", "ks_wc_max_pct", "ks_wp_max_pct", "ks_dr_pct"):
            close(sum(getattr(r, col) for r in rows) / 7, COPY_SPELL_AVERAGES[col])
        close(sum(r.accuracy_suggest_pct for r in rows) / 7,
              COPY_SPELL_AVERAGES["accuracy_suggest_pct"])
        close(sum(r.accuracy_letter_pct for r in rows) / 7,
              COPY_SPELL_AVERAGES["accuracy_letter_pct"])
        close(sum(r.sr_letter_pct for r in rows) / 7, COPY_SPELL_AVERAGES["sr_letter_pct"])

    def test_recomputed_averages_also_match(self):
        # averaging the freshly computed rates, not the recorded ones
        letter, suggest1, suggest2 = [], [], []
        for row in COPY_SPELL_ROWS:
            letter.append(itr_star(
                itr_bits_per_selection(row.sr_letter_pct / 100, N_BASE_CHOICES),
                T, row.n_char / row.n_sel_letter))
            suggest1.append(itr_star(
                itr_bits_per_selection(row.sr_suggest_pct / 100, N_BASE_CHOICES),
                T, row.n_char / row.n_sel_suggest))
            if row.mean_suggestion_chars is not None:
                suggest2.append(itr_star(
                    itr_bits_per_selection(
                        row.sr_suggest_pct / 100,
                        suggestion_augmented_choices(row.mean_suggestion_chars)),
                    T, row.n_char / row.n_sel_suggest))
        close(sum(letter) / 7, COPY_SPELL_AVERAGES["rate_letter"])
        close(sum(suggest1) / 7, COPY_SPELL_AVERAGES["rate_suggest_1"])
        close(sum(suggest2) / 6, COPY_SPELL_AVERAGES["rate_suggest_2"])


class TestImprovisedRows:
    def test_sentences_are_internally_consistent(self):
        for row in IMPROVISED_ROWS:
            text = row.sentence.replace("-", " ")
            assert len(text) == row.n_char, row.label
            assert len(text.split()) == row.n_words, row.label

    @pytest.mark.parametrize("row", IMPROVISED_ROWS, ids=lambda r: r.label)
    def test_rates_reproduce(self, row):
        rep = compute_report(
            n_char=row.n_char, n_words=row.n_words,
            n_selections=row.n_selections, p_correct=1.0,
            mean_suggestion_chars=row.mean_suggestion_chars,
            n_keystrokes=row.n_keystrokes,
        )
        close(rep.itr_star_1_bits_per_min, row.rate_1)
        close(rep.itr_star_2_bits_per_min, row.rate_2)
        close(rep.ks_pct, row.ks_pct)
        close(rep.ks_wc_max_pct, row.ks_wc_max_pct)
        close(rep.ks_wp_max_pct, row.ks_wp_max_pct)
        close(rep.ks_dr_pct, row.ks_dr_pct)

    def test_averages_reproduce(self):
        rows = IMPROVISED_ROWS
        for col, want in IMPROVISED_AVERAGES.items():
            close(sum(getattr(r, col) for r in rows) / 7, want)


def make_trace():
    sels = (
        Selection("A", True, "A"),
        Selection("B", True, "AB"),
        Selection("Sp", True, "AB "),
        Selection("C", True, "AB C"),
        Selection("En", True, "AB C"),
    )
    return SentenceRecord(final_composed="AB C", selections=sels, target="AB C")


class TestRecordReports:
    def test_copy_spell_record(self):
        rep = report_from_record(make_trace())
        assert rep.n_char == 4 and rep.n_words == 2 and rep.n_selections == 5
        assert rep.success_rate_pct == 100.0
        assert rep.selection_accuracy_pct == 100.0
        assert rep.n_keystrokes == 4  # En moved no text
        assert rep.chars_per_selection == pytest.approx(0.8)
        assert rep.time_to_complete_min == pytest.approx(5 * T / 60.0)

    def test_no_suggestions_shown_collapses_widened_rate(self):
        rep = report_from_record(make_trace())
        assert rep.mean_suggestion_chars == 0.0
        assert rep.itr_star_2_bits_per_min == pytest.approx(
            rep.itr_star_1_bits_per_min
        )

    def test_simulated_duration_example(self):
        rep = compute_report(n_char=25, n_words=7, n_selections=22, p_correct=1.0)
        assert round(rep.time_to_complete_min, 2) == 9.01

    def test_improvised_record_assumes_perfect_choice(self):
        sels = (
            Selection("H", True, "H", slots_shown=("HI", "HELLO")),
            Selection("S0", True, "HI "),
        )
        rec = SentenceRecord(final_composed="HI ", selections=sels, target=None)
        rep = report_from_record(rec)
        assert rep.success_rate_pct is None
        assert rep.mean_suggestion_chars == pytest.approx((2 + 5) / 2)
        # rate uses P=1
        assert rep.itr_star_1_bits_per_min == pytest.approx(
            itr_star(math.log2(28), T, 2 / 2)
        )

    def test_incorrect_selection_lowers_accuracy(self):
        sels = (
            Selection("A", True, "A"),
            Selection("X", False, "AX"),
            Selection("DC", True, "A"),
            Selection("B", True, "AB"),
        )
        rec = SentenceRecord(final_composed="AB", selections=sels, target="AB")
        rep = report_from_record(rec)
        assert rep.selection_accuracy_pct == pytest.approx(75.0)
        assert rep.n_keystrokes == 2

    def test_empty_record_rejected(self):
        with pytest.raises(UndefinedRateError):
            report_from_record(SentenceRecord(final_composed="", selections=(), target="A"))

    def test_zero_success_renders_rate_columns_empty(self):
        # Chance-level output: no character of the target matched, so the
        # rate metrics are undefined and surface as missing, not as errors.
        rec = SentenceRecord(
            final_composed="XY",
            selections=(
                Selection("X", False, "X"),
                Selection("Y", False, "XY"),
            ),
            target="AB",
        )
        rep = report_from_record(rec)
        assert rep.success_rate_pct == 0.0
        assert rep.itr_star_1_bits_per_min is None
        assert rep.itr_star_2_bits_per_min is None
        assert rep.n_char == 2


class TestLogIngestion:
    def test_rebuilds_record_from_events(self):
        events = [
            {"event": "session_start", "target": "AB", "selection_duration_ms": 24560},
            {"event": "suggestions", "slots": ["AB"] + [""] * 9},
            {"event": "trial_result", "recognized": "A", "intended": "A", "correct": True},
            {"event": "compose", "composed": "A", "finished": False},
            {"event": "suggestions", "slots": ["AB"] + [""] * 9},
            {"event": "trial_result", "recognized": "S0", "intended": "S0", "correct": True},
            {"event": "compose", "composed": "AB ", "finished": False},
            {"event": "session_end"},
        ]
        rec = record_from_log_events(events, label="demo")
        assert rec.target == "AB"
        assert rec.final_composed == "AB "
        assert rec.t_per_selection_s == pytest.approx(24.56)
        assert [s.key_label for s in rec.selections] == ["A", "S0"]
        assert rec.selections[1].slots_shown[0] == "AB"
        rep = report_from_record(rec)
        assert rep.success_rate_pct == 100.0

    def test_empty_log_rejected(self):
        with pytest.raises(InputError):
            record_from_log_events([{"event": "session_start"}])


class TestReportRendering:
    def rows(self):
        return [
            compute_report(label="S01", n_char=25, n_words=7, n_selections=22,
                           p_correct=1.0, selection_accuracy_pct=77.27,
                           success_rate_pct=100.0,
                           mean_suggestion_chars=41.52, n_keystrokes=11),
            compute_report(label="S03", n_char=17, n_words=4, n_selections=25,
                           p_correct=1.0, selection_accuracy_pct=72.00,
                           success_rate_pct=100.0,
                           mean_suggestion_chars=52.75, n_keystrokes=11),
        ]

    def test_single_row_average_is_the_row(self):
        row = self.rows()[0]
        avg = average_report([row])
        for name in row.__dataclass_fields__:
            if name == "label":
                continue
            got, want = getattr(avg, name), getattr(row, name)
            if isinstance(want, float):
                assert got == pytest.approx(want)
            else:
                assert got == want

    def test_average_ceils_count_columns(self):
        avg = average_report(self.rows())
        assert avg.n_char == 21  # ceil(21.0)
        assert avg.n_selections == math.ceil((22 + 25) / 2)
        assert avg.label == "Average"

    def test_average_skips_missing_cells(self):
        rows = [
            compute_report(label="A", n_char=10, n_words=2, n_selections=5,
                           p_correct=1.0, mean_suggestion_chars=30.0),
            compute_report(label="B", n_char=10, n_words=2, n_selections=5,
                           p_correct=1.0),
        ]
        avg = average_report(rows)
        assert avg.mean_suggestion_chars == pytest.approx(30.0)
        assert avg.itr_star_2_bits_per_min == pytest.approx(
            rows[0].itr_star_2_bits_per_min
        )

    def test_text_format(self):
        out = emit_report(self.rows(), "text")
        lines = out.strip().splitlines()
        assert lines[0].split()[0] == "label"
        assert len(lines) == 2 + 2 + 1  # header, rule, two rows, average
        assert "Average" in lines[-1]
        assert "N/A" not in out  # every metric applies here

    def test_csv_format(self):
        out = emit_report(self.rows(), "csv")
        parsed = list(csv.reader(io.StringIO(out)))
        assert parsed[0][0] == "label"
        assert len(parsed) == 4
        assert parsed[-1][0] == "Average"

    def test_json_format(self):
        out = emit_report(self.rows(), "json")
        payload = json.loads(out)
        assert [row["label"] for row in payload] == ["S01", "S03", "Average"]
        assert payload[0]["n_char"] == 25

    def test_unknown_format_rejected(self):
        with pytest.raises(ParameterError):
            emit_report(self.rows(), "xml")

    def test_single_row_report_has_no_average_line(self):
        out = emit_report(self.rows()[:1], "text")
        assert "Average" not in out
