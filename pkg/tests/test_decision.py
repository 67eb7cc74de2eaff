import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trustsup.decision import (EvalRecord, METRIC_ROWS, maximal_vote, metrics_rows,
                               predicted_vote, trust_flag, trusted_metrics, vote_counts,
                               write_metrics_csv)
from trustsup.errors import DataFormatError
from trustsup.numerics import seeded_rng


class TestTrustFlag:
    def test_above_threshold(self):
        assert trust_flag(0.7, 0.5) == 1

    def test_below_threshold(self):
        assert trust_flag(0.3, 0.5) == 0

    def test_boundary_is_untrusted(self):
        assert trust_flag(0.5, 0.5) == 0

    @settings(max_examples=60, deadline=None)
    @given(tt=st.floats(-5, 10), y1=st.floats(-5, 10), y2=st.floats(-5, 10))
    def test_monotone_in_y(self, tt, y1, y2):
        lo, hi = min(y1, y2), max(y1, y2)
        assert trust_flag(lo, tt) <= trust_flag(hi, tt)


class TestVotes:
    def test_vote_counts_from_activations(self):
        acts = np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.6, 0.3, 0.1]])
        assert list(vote_counts(acts)) == [2, 1, 0]

    def test_maximal_plain(self):
        assert maximal_vote([5, 2, 0]) == 0

    def test_maximal_tie_takes_lowest_index(self):
        assert maximal_vote([3, 3, 1]) == 0
        assert maximal_vote([0, 2, 2]) == 1

    def test_maximal_matches_scan_oracle(self):
        rng = seeded_rng(0)
        for _ in range(50):
            counts = rng.integers(0, 5, size=6)
            if counts.sum() == 0:
                counts[3] = 1
            best, best_c = max(enumerate(counts), key=lambda kv: (kv[1], -kv[0]))
            assert maximal_vote(counts) == best

    def test_maximal_rejects_all_zero(self):
        with pytest.raises(DataFormatError):
            maximal_vote([0, 0, 0])

    def test_predicted_basic(self):
        assert predicted_vote([5, 2, 0], 2.4) == 1

    def test_predicted_exact_match(self):
        assert predicted_vote([5, 2, 0], 5.0) == 0

    def test_predicted_tie_prefers_larger_count(self):
        assert predicted_vote([4, 3, 0], 3.5) == 0

    def test_predicted_tie_same_count_takes_lower_index(self):
        assert predicted_vote([0, 2, 2], 1.0) == 1

    def test_predicted_excludes_zero_vote_classes(self):
        assert predicted_vote([0, 1, 7], 0.0) == 1

    def test_predicted_rejects_all_zero(self):
        with pytest.raises(DataFormatError):
            predicted_vote([0, 0, 0], 1.0)

    def test_unanimous_counts_with_full_regression(self):
        counts = [0, 0, 7, 0]
        assert predicted_vote(counts, 7.0) == 2


def record(correct: bool, trusted: bool, i: int = 0) -> EvalRecord:
    return EvalRecord(f"s{i}", 1, 1 if correct else 0, 3.0 if trusted else 1.0,
                      1 if trusted else 0)


class TestTrustedMetrics:
    def test_all_correct_all_trusted(self):
        m = trusted_metrics([record(True, True, i) for i in range(5)])
        assert m.untrusted_accuracy == 1.0
        assert m.trusted_accuracy == 1.0
        assert m.precision == 1.0
        assert m.recall == 1.0
        assert m.degenerate == ("specificity",)

    def test_hand_counted_mix(self):
        records = ([record(True, True, i) for i in range(3)]       # 3 TP
                   + [record(False, False, i + 3) for i in range(2)]  # 2 TN
                   + [record(False, True, 5)]                         # 1 FP
                   + [record(True, False, i + 6) for i in range(2)])  # 2 FN
        m = trusted_metrics(records)
        assert (m.tp, m.tn, m.fp, m.fn) == (3, 2, 1, 2)
        assert m.trusted_accuracy == pytest.approx(5 / 8)
        assert m.precision == pytest.approx(3 / 4)
        assert m.recall == pytest.approx(3 / 5)
        assert m.specificity == pytest.approx(2 / 3)
        assert m.untrusted_accuracy == pytest.approx(5 / 8)
        assert m.degenerate == ()

    def test_all_wrong_all_untrusted(self):
        m = trusted_metrics([record(False, False, i) for i in range(4)])
        assert m.untrusted_accuracy == 0.0
        assert m.trusted_accuracy == 1.0  # correct rejection everywhere
        assert m.precision == 1.0 and "precision" in m.degenerate
        assert m.recall == 1.0 and "recall" in m.degenerate
        assert m.f1 == 1.0 and "f1" in m.degenerate

    def test_empty_rejected(self):
        with pytest.raises(DataFormatError):
            trusted_metrics([])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=40))
    def test_identities(self, flags):
        records = [record(c, t, i) for i, (c, t) in enumerate(flags)]
        n = len(records)
        m = trusted_metrics(records)
        assert m.tp + m.tn + m.fp + m.fn == n
        assert m.trusted_accuracy == pytest.approx((m.tp + m.tn) / n)
        assert m.trusted_accuracy - m.untrusted_accuracy == pytest.approx((m.tn - m.fn) / n)
        if m.tp + m.fp > 0 and m.tp + m.fn > 0 and m.precision + m.recall > 0:
            expected_f1 = 2 * m.precision * m.recall / (m.precision + m.recall)
            assert m.f1 == pytest.approx(expected_f1)
        for rate in (m.precision, m.recall, m.specificity, m.f1,
                     m.untrusted_accuracy, m.trusted_accuracy):
            assert 0.0 <= rate <= 1.0


class TestMetricsTable:
    def test_csv_rows_match_report_labels(self, tmp_path):
        m = trusted_metrics([record(True, True), record(False, False, 1)])
        path = tmp_path / "metrics.csv"
        write_metrics_csv(path, {"Predicted": m, "Maximal": m})
        lines = path.read_text().splitlines()
        assert lines[0] == "Metric,Predicted,Maximal"
        assert [line.split(",")[0] for line in lines[1:]] == METRIC_ROWS

    def test_rows_follow_metric_order(self):
        m = trusted_metrics([record(True, True), record(False, False, 1)])
        rows = metrics_rows({"Only": m})
        values = {label: value for label, value in rows}
        assert values["Untrusted accuracy"] == m.untrusted_accuracy
        assert values["Trusted accuracy"] == m.trusted_accuracy
        assert values["Trusted F1 score"] == m.f1
        assert values["Trusted specificity"] == m.specificity
