"""Per-frame score assembly: max-pooling, normalization, fusion, smoothing.

Object-level scores become a frame score by taking the most salient object
in each frame. Static and temporal series are min-max normalized per video
to make them commensurable, combined as a convex mixture, and Gaussian
smoothed into the final series.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vadkit._util import format_float

SCORE_COLUMNS = ("frame", "static", "temporal", "fused", "final")


@dataclass
class ScoreSeries:
    video_id: str
    values: np.ndarray  # (frame_count,) float64
    kind: str  # static | temporal | fused | final

    def __len__(self) -> int:
        return int(self.values.shape[0])


def frame_max_pool(
    frame_count: int,
    object_scores: list[tuple[int, float]],
    video_id: str = "",
    kind: str = "static",
) -> ScoreSeries:
    """Per-frame maximum over (frame, score) pairs; frames with no objects get 0.

    Overlapping contributions from multiple clips of one object and from
    different objects collapse to the same per-frame max, so a single pass
    suffices.
    """
    values = np.zeros(frame_count)
    for frame, score in object_scores:
        if not (0 <= frame < frame_count):
            raise ValueError(f"frame {frame} outside [0, {frame_count})")
        if score > values[frame]:
            values[frame] = score
    return ScoreSeries(video_id=video_id, values=values, kind=kind)


def minmax_normalize(series: ScoreSeries) -> ScoreSeries:
    """Affine map of the series onto [0, 1]; a constant series maps to zeros."""
    values = series.values
    lo = float(values.min())
    hi = float(values.max())
    if hi > lo:
        normalized = (values - lo) / (hi - lo)
    else:
        normalized = np.zeros_like(values)
    return ScoreSeries(video_id=series.video_id, values=normalized, kind=series.kind)


def minmax_normalize_pooled(series_list: list[ScoreSeries]) -> list[ScoreSeries]:
    """Apply one shared affine map (pooled min and max) to every series.

    Keeps scores comparable across videos so pooled ranking metrics are
    meaningful; a collection that is constant overall maps to all zeros,
    mirroring minmax_normalize.
    """
    nonempty = [s for s in series_list if len(s)]
    if not nonempty:
        return [ScoreSeries(s.video_id, s.values.copy(), s.kind) for s in series_list]
    lo = min(float(s.values.min()) for s in nonempty)
    hi = max(float(s.values.max()) for s in nonempty)
    out = []
    for s in series_list:
        if hi > lo:
            values = (s.values - lo) / (hi - lo)
        else:
            values = np.zeros_like(s.values)
        out.append(ScoreSeries(video_id=s.video_id, values=values, kind=s.kind))
    return out


def fuse(static: ScoreSeries, temporal: ScoreSeries, weight: float = 0.5) -> ScoreSeries:
    """Convex combination weight*static + (1-weight)*temporal."""
    if len(static) != len(temporal):
        raise ValueError(f"length mismatch: static {len(static)} vs temporal {len(temporal)}")
    if not (0.0 <= weight <= 1.0):
        raise ValueError(f"fusion weight must be in [0, 1], got {weight}")
    values = weight * static.values + (1.0 - weight) * temporal.values
    return ScoreSeries(video_id=static.video_id, values=values, kind="fused")


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Unnormalized truncated kernel exp(-i^2 / (2 sigma^2)), i in [-r, r], r = ceil(3 sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = int(np.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    return np.exp(-(offsets**2) / (2.0 * sigma * sigma))


def gaussian_smooth(series: ScoreSeries, sigma: float = 2.0) -> ScoreSeries:
    """Convolve with the truncated kernel, renormalizing over in-bounds taps.

    At every position the weights sum to 1 over the valid support, so each
    output value is a convex combination of inputs (boundaries included) and
    the output stays within [min(input), max(input)].
    """
    kernel = gaussian_kernel(sigma)
    values = series.values
    if len(values) == 0:
        return ScoreSeries(series.video_id, values.copy(), kind="final")
    # center the full convolution explicitly: mode="same" would return
    # kernel-length output for series shorter than the kernel
    radius = kernel.size // 2
    weighted = np.convolve(values, kernel)[radius : radius + len(values)]
    coverage = np.convolve(np.ones_like(values), kernel)[radius : radius + len(values)]
    return ScoreSeries(series.video_id, weighted / coverage, kind="final")


def write_scores_csv(
    path: Path | str,
    static: ScoreSeries,
    temporal: ScoreSeries,
    fused: ScoreSeries,
    final: ScoreSeries,
) -> None:
    """Columns frame, static, temporal, fused, final; floats in shortest round-trip form."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(final)
    assert len(static) == len(temporal) == len(fused) == n
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCORE_COLUMNS)
        for frame in range(n):
            writer.writerow(
                [
                    frame,
                    format_float(static.values[frame]),
                    format_float(temporal.values[frame]),
                    format_float(fused.values[frame]),
                    format_float(final.values[frame]),
                ]
            )


def read_scores_csv(path: Path | str) -> dict[str, np.ndarray]:
    """Read a scores CSV back into column arrays keyed by column name."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SCORE_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [[float(cell) for cell in row] for row in reader]
    data = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(SCORE_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(SCORE_COLUMNS)}
