"""Frame-to-frame association of detections into tracks, and clip segmentation.

Association is a two-stage scheme in the ByteTrack style: active tracks are
matched first against high-confidence detections, then against the remaining
low-confidence band. Matching within a stage is greedy by descending IoU with
deterministic tie-breaking, so identical inputs always produce identical
tracks. Tracks never bridge gaps: a track that misses a frame terminates and
a reappearing object starts a new one, which keeps frames strictly
consecutive within every track.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vadkit._util import canonical_jsonl_line, write_text
from vadkit.dataset import FeatureStore, VideoManifest
from vadkit.geometry import iou


@dataclass
class TrackerConfig:
    conf_high: float = 0.6
    conf_low: float = 0.1
    iou_min: float = 0.3


@dataclass
class Track:
    """A frame-contiguous trajectory of one object.

    entries holds (frame, detection index) pairs with strictly consecutive
    frames; detection indices point into the owning manifest's detection list.
    """

    track_id: int
    entries: list[tuple[int, int]]

    @property
    def f_begin(self) -> int:
        return self.entries[0][0]

    @property
    def f_end(self) -> int:
        return self.entries[-1][0]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class Clip:
    """A fixed-length window over one track, the unit the temporal model consumes."""

    track_id: int
    start_frame: int
    features: np.ndarray  # (L, D) float64
    answers: list[dict[str, str]]
    det_indices: list[int]

    def __len__(self) -> int:
        return self.features.shape[0]


def _greedy_match(
    tracks: list[Track],
    det_indices: list[int],
    manifest: VideoManifest,
    iou_min: float,
) -> list[tuple[int, int]]:
    """Greedy one-to-one matching by descending IoU against each track's
    latest box.

    Ties break on (lower track_id, lower detection index). Returns
    (position-in-tracks, detection index) pairs.
    """
    candidates = []
    for pos, track in enumerate(tracks):
        prev_box = manifest.detections[track.entries[-1][1]].bbox
        for det_idx in det_indices:
            overlap = iou(prev_box, manifest.detections[det_idx].bbox)
            if overlap >= iou_min:
                candidates.append((-overlap, track.track_id, det_idx, pos))
    candidates.sort()
    matched: list[tuple[int, int]] = []
    used_tracks: set[int] = set()
    used_dets: set[int] = set()
    for _neg_iou, _tid, det_idx, pos in candidates:
        if pos in used_tracks or det_idx in used_dets:
            continue
        used_tracks.add(pos)
        used_dets.add(det_idx)
        matched.append((pos, det_idx))
    return matched


def build_tracks(manifest: VideoManifest, cfg: TrackerConfig | None = None) -> list[Track]:
    """Associate the manifest's detections into tracks.

    Stage 1 matches active tracks to detections with confidence >= conf_high;
    stage 2 matches leftover tracks to the [conf_low, conf_high) band. Matches
    require IoU >= iou_min against the track's latest box. Unmatched
    high-confidence detections spawn new tracks; unmatched tracks terminate.
    """
    cfg = cfg or TrackerConfig()
    by_frame = manifest.detections_by_frame()
    tracks: list[Track] = []
    active: list[Track] = []
    next_id = 0

    for frame in range(manifest.frame_count):
        dets = by_frame.get(frame, [])
        high = [i for i in dets if manifest.detections[i].confidence >= cfg.conf_high]
        low = [
            i
            for i in dets
            if cfg.conf_low <= manifest.detections[i].confidence < cfg.conf_high
        ]

        matched_positions: set[int] = set()
        matched_dets: set[int] = set()
        for pos, det_idx in _greedy_match(active, high, manifest, cfg.iou_min):
            active[pos].entries.append((frame, det_idx))
            matched_positions.add(pos)
            matched_dets.add(det_idx)

        remaining = [t for p, t in enumerate(active) if p not in matched_positions]
        for pos, det_idx in _greedy_match(remaining, low, manifest, cfg.iou_min):
            remaining[pos].entries.append((frame, det_idx))
            matched_dets.add(det_idx)

        next_active = [t for t in active if t.entries[-1][0] == frame]
        for det_idx in high:
            if det_idx in matched_dets:
                continue
            track = Track(track_id=next_id, entries=[(frame, det_idx)])
            next_id += 1
            tracks.append(track)
            next_active.append(track)
        active = next_active

    return tracks


def segment_clips(
    track: Track,
    manifest: VideoManifest,
    store: FeatureStore,
    length: int,
    stride: int = 1,
) -> list[Clip]:
    """Slide windows [s, s+length) over the track at the given stride.

    Tracks shorter than length yield no clips. Window count for a track of
    n entries is floor((n - length) / stride) + 1 when n >= length.
    """
    if length < 2:
        raise ValueError(f"clip length must be >= 2, got {length}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    n = len(track.entries)
    clips: list[Clip] = []
    for start in range(0, n - length + 1, stride):
        window = track.entries[start : start + length]
        det_indices = [det_idx for _f, det_idx in window]
        feats = np.stack(
            [store.get(manifest.detections[i].feature_ref) for i in det_indices]
        )
        answers = [manifest.detections[i].answers for i in det_indices]
        clips.append(
            Clip(
                track_id=track.track_id,
                start_frame=window[0][0],
                features=feats,
                answers=answers,
                det_indices=det_indices,
            )
        )
    return clips


def save_tracks(tracks: list[Track], path: Path | str) -> None:
    """One track per line: {"track_id": ..., "entries": [[frame, det_index], ...]}."""
    lines = [
        canonical_jsonl_line({"track_id": t.track_id, "entries": [list(e) for e in t.entries]})
        for t in tracks
    ]
    write_text(Path(path), "".join(lines))


def load_tracks(path: Path | str) -> list[Track]:
    tracks = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            entries = [(int(f), int(i)) for f, i in record["entries"]]
            tracks.append(Track(track_id=int(record["track_id"]), entries=entries))
    return tracks
