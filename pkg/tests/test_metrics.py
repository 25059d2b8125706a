"""Frame-level ROC AUC (micro and macro) and average precision."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vadkit.errors import MetricsError
from vadkit.metrics import (
    LabeledScores,
    average_precision,
    macro_auc,
    micro_auc,
    roc_points,
)


def pairwise_auc_oracle(scores, labels) -> float:
    """O(n^2) rank statistic: P(s+ > s-) + 0.5 P(s+ = s-), the textbook AUC."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def one(scores, labels) -> list[LabeledScores]:
    return [LabeledScores(np.asarray(scores, dtype=np.float64),
                          np.asarray(labels, dtype=np.int64))]


def random_labeled(rng: np.random.Generator, n: int, with_ties: bool) -> LabeledScores:
    """Both classes guaranteed; quantized scores force ties when requested."""
    labels = np.zeros(n, dtype=np.int64)
    labels[rng.permutation(n)[: int(rng.integers(1, n))] ] = 1
    if with_ties:
        scores = rng.integers(0, max(2, n // 4), n).astype(np.float64) / 7.0
    else:
        scores = rng.permutation(n).astype(np.float64) / n
    return LabeledScores(scores, labels)


class TestLabeledScores:
    def test_rejects_shape_mismatch(self):
        with pytest.raises(MetricsError):
            LabeledScores(np.zeros(3), np.zeros(2, dtype=np.int64))

    def test_rejects_non_finite_scores(self):
        with pytest.raises(MetricsError):
            LabeledScores(np.array([0.1, np.nan]), np.array([0, 1]))

    def test_rejects_non_binary_labels(self):
        with pytest.raises(MetricsError):
            LabeledScores(np.array([0.1, 0.2]), np.array([0, 2]))


class TestMicroAuc:
    def test_perfect_ranking(self):
        assert micro_auc(one([0.1, 0.9], [0, 1])) == 1.0

    def test_inverted_ranking(self):
        assert micro_auc(one([0.9, 0.1], [0, 1])) == 0.0

    def test_tie_case(self):
        # positives {0.4, 0.8} vs negatives {0.2, 0.4}: 3 wins + 1 half = 0.875
        assert micro_auc(one([0.2, 0.4, 0.4, 0.8], [0, 0, 1, 1])) == pytest.approx(
            0.875, abs=1e-15
        )

    def test_concatenates_before_scoring(self):
        a = LabeledScores(np.array([0.9]), np.array([1]))
        b = LabeledScores(np.array([0.1]), np.array([0]))
        assert micro_auc([a, b]) == 1.0

    def test_single_class_pool_rejected(self):
        with pytest.raises(MetricsError, match="positive and one negative"):
            micro_auc(one([0.5, 0.6], [1, 1]))

    def test_empty_rejected(self):
        with pytest.raises(MetricsError):
            micro_auc([])

    def test_matches_pairwise_oracle(self):
        # acceptance-grade sweep: 100 random instances, ties included
        rng = np.random.default_rng(30)
        for case in range(100):
            n = int(rng.integers(2, 201))
            data = random_labeled(rng, n, with_ties=bool(case % 2))
            fast = micro_auc([data])
            slow = pairwise_auc_oracle(data.scores, data.labels)
            assert abs(fast - slow) <= 1e-12

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=150, deadline=None)
    def test_monotone_transform_invariant(self, seed):
        rng = np.random.default_rng(seed)
        data = random_labeled(rng, int(rng.integers(2, 60)), with_ties=bool(seed % 2))
        base = micro_auc([data])
        for transform in (
            lambda s: 3.0 * s + 11.0,
            np.exp,
            np.arctan,
            lambda s: s + s**3,
        ):
            mapped = LabeledScores(transform(data.scores), data.labels)
            assert abs(micro_auc([mapped]) - base) <= 1e-12

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=150, deadline=None)
    def test_complement_and_label_swap_tie_free(self, seed):
        rng = np.random.default_rng(seed)
        data = random_labeled(rng, int(rng.integers(2, 60)), with_ties=False)
        base = micro_auc([data])
        flipped = LabeledScores(-data.scores, data.labels)
        assert base + micro_auc([flipped]) == pytest.approx(1.0, abs=1e-12)
        if 0 < data.labels.sum() < data.labels.size:
            swapped = LabeledScores(data.scores, 1 - data.labels)
            assert micro_auc([swapped]) == pytest.approx(1.0 - base, abs=1e-12)


class TestRocPoints:
    def test_curve_shape(self):
        pts = roc_points(one([0.2, 0.4, 0.4, 0.8], [0, 0, 1, 1])[0])
        assert pts[0, 0] == np.inf and pts[0, 1] == 0.0 and pts[0, 2] == 0.0
        assert pts[-1, 1] == 1.0 and pts[-1, 2] == 1.0
        # thresholds strictly descending, rates non-decreasing
        assert (np.diff(pts[:, 0]) < 0).all()
        assert (np.diff(pts[:, 1]) >= 0).all()
        assert (np.diff(pts[:, 2]) >= 0).all()

    def test_one_row_per_distinct_score(self):
        pts = roc_points(one([0.2, 0.4, 0.4, 0.8], [0, 0, 1, 1])[0])
        assert pts.shape == (4, 3)  # implicit start + 3 distinct thresholds


class TestMacroAuc:
    def test_mean_of_per_video(self):
        a = one([0.1, 0.9], [0, 1])[0]  # AUC 1.0
        b = one([0.4, 0.6, 0.5], [1, 1, 0])[0]  # AUC 0.5
        mean, per_video = macro_auc([a, b])
        assert per_video == [1.0, 0.5]
        assert mean == pytest.approx(0.75, abs=1e-15)

    def test_single_class_video_contributes_none(self):
        a = one([0.1, 0.9], [0, 1])[0]
        b = LabeledScores(np.array([0.3, 0.4]), np.array([0, 0]))
        mean, per_video = macro_auc([a, b])
        assert per_video == [1.0, None]
        assert mean == 1.0

    def test_all_single_class(self):
        b = LabeledScores(np.array([0.3]), np.array([0]))
        mean, per_video = macro_auc([b])
        assert mean is None and per_video == [None]


class TestAveragePrecision:
    def test_perfect_ranking(self):
        data = one([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0])[0]
        assert average_precision(data) == 1.0

    def test_single_positive_ranked_second(self):
        data = one([0.9, 0.8], [0, 1])[0]
        assert average_precision(data) == 0.5

    def test_hand_computed_case(self):
        # precision 1/1 at rank 1 and 2/3 at rank 3, averaged over 2 positives
        data = one([0.9, 0.8, 0.7], [1, 0, 1])[0]
        assert average_precision(data) == pytest.approx((1.0 + 2.0 / 3.0) / 2.0, abs=1e-15)
        assert average_precision(data) == pytest.approx(0.8333, abs=1e-4)

    def test_no_positives_rejected(self):
        with pytest.raises(MetricsError, match="positive"):
            average_precision(one([0.1, 0.2], [0, 0])[0])

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_bounded_and_perfect_iff_separated(self, seed):
        rng = np.random.default_rng(seed)
        data = random_labeled(rng, int(rng.integers(2, 50)), with_ties=False)
        ap = average_precision(data)
        assert 0.0 < ap <= 1.0
        if micro_auc([data]) == 1.0:
            assert ap == 1.0
