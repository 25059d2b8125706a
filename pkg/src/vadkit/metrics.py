"""Frame-level evaluation: ROC AUC with exact tie handling, average precision.

Micro aggregation concatenates frames from all test videos before tracing
the ROC over every distinct threshold; the trapezoidal area then equals the
rank statistic P(s+ > s-) + 0.5 P(s+ = s-). A per-video macro average is
reported alongside since part of the literature quotes it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vadkit.errors import MetricsError


@dataclass
class LabeledScores:
    scores: np.ndarray
    labels: np.ndarray  # 0/1 ints

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.scores.shape != self.labels.shape or self.scores.ndim != 1:
            raise MetricsError("scores and labels must be 1-D arrays of equal length")
        if not np.isfinite(self.scores).all():
            raise MetricsError("non-finite score")
        if not np.isin(self.labels, (0, 1)).all():
            raise MetricsError("labels must be 0 or 1")


def roc_points(data: LabeledScores) -> np.ndarray:
    """ROC curve rows (threshold, fpr, tpr), one per distinct score, descending.

    Starts at the implicit (inf, 0, 0) operating point and ends at (min, 1, 1).
    """
    positives = int(data.labels.sum())
    negatives = int(data.labels.size - positives)
    if positives == 0 or negatives == 0:
        raise MetricsError("AUC needs at least one positive and one negative frame")
    order = np.argsort(-data.scores, kind="stable")
    sorted_scores = data.scores[order]
    sorted_labels = data.labels[order]
    # group ties: indices where a run of equal scores ends
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    boundaries = np.concatenate([distinct, [sorted_scores.size - 1]])
    tp = np.cumsum(sorted_labels)[boundaries]
    fp = (boundaries + 1) - tp
    rows = np.column_stack(
        [
            sorted_scores[boundaries],
            fp / negatives,
            tp / positives,
        ]
    )
    first = np.array([[np.inf, 0.0, 0.0]])
    return np.concatenate([first, rows])


def _auc(scores: np.ndarray, labels: np.ndarray) -> float:
    points = roc_points(LabeledScores(scores, labels))
    fpr = points[:, 1]
    tpr = points[:, 2]
    # trapezoidal integration over the tie-grouped ROC; exact for ties
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))


def micro_auc(datasets: list[LabeledScores]) -> float:
    """Concatenate all videos' frames, then compute ROC AUC over the pool."""
    if not datasets:
        raise MetricsError("no data")
    scores = np.concatenate([d.scores for d in datasets])
    labels = np.concatenate([d.labels for d in datasets])
    return _auc(scores, labels)


def macro_auc(datasets: list[LabeledScores]) -> tuple[float | None, list[float | None]]:
    """Mean of per-video AUCs; videos with a single class contribute None."""
    per_video: list[float | None] = []
    for d in datasets:
        try:
            per_video.append(_auc(d.scores, d.labels))
        except MetricsError:
            per_video.append(None)
    defined = [v for v in per_video if v is not None]
    return (sum(defined) / len(defined) if defined else None), per_video


def average_precision(data: LabeledScores) -> float:
    """Non-interpolated AP over descending-score ranks.

    Ties are broken by stable input order: among equal scores, the earlier
    frame is ranked first.
    """
    positives = int(data.labels.sum())
    if positives == 0:
        raise MetricsError("AP needs at least one positive frame")
    order = np.argsort(-data.scores, kind="stable")
    sorted_labels = data.labels[order]
    hits = np.cumsum(sorted_labels)
    ranks = np.arange(1, sorted_labels.size + 1)
    precision_at_positive = hits[sorted_labels == 1] / ranks[sorted_labels == 1]
    return float(precision_at_positive.sum() / positives)
