"""On-disk dataset representation: loading, validation, and canonical saving.

One directory per video:

    <video>/manifest.json       counts and image size
    <video>/detections.jsonl    one detection per line, sorted by frame
    <video>/features.bin        row-major little-endian float32
    <video>/features.idx.json   {"dim": D, "rows": N}
    <video>/labels.json         optional per-frame 0/1 list

A dataset root groups videos under train/ and test/ and carries the prompt
pool at its top level:

    <root>/prompt_pool.json
    <root>/train/<video_id>/...
    <root>/test/<video_id>/...

Train videos may omit labels.json; test videos must provide it. Formats are
bit-exact: canonical JSON (sorted keys), features as IEEE-754 binary32 with
no padding, so load -> save -> load is the identity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from vadkit._util import canonical_json, canonical_jsonl_line, read_json, write_text
from vadkit.errors import DatasetError
from vadkit.geometry import BBox

MANIFEST_FILE = "manifest.json"
DETECTIONS_FILE = "detections.jsonl"
FEATURES_FILE = "features.bin"
FEATURES_INDEX_FILE = "features.idx.json"
LABELS_FILE = "labels.json"
PROMPT_POOL_FILE = "prompt_pool.json"

TRAIN_DIR = "train"
TEST_DIR = "test"


@dataclass(frozen=True)
class Detection:
    """One per-frame object observation."""

    frame: int
    bbox: BBox
    confidence: float
    feature_ref: int
    answers: dict[str, str]


@dataclass
class FeatureStore:
    """Dense per-detection feature rows; float32 on disk, float64 in math."""

    rows: np.ndarray  # (n, dim) float32

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    @property
    def row_count(self) -> int:
        return int(self.rows.shape[0])

    def get(self, ref: int) -> np.ndarray:
        return self.rows[ref].astype(np.float64)


@dataclass
class VideoManifest:
    video_id: str
    frame_count: int
    image_width: int
    image_height: int
    detections: list[Detection]
    labels: list[int] | None = None
    extra: dict = field(default_factory=dict)  # unknown manifest keys, preserved

    def detections_at(self, frame: int) -> list[int]:
        return [i for i, d in enumerate(self.detections) if d.frame == frame]

    def detections_by_frame(self) -> dict[int, list[int]]:
        """Detection indices grouped by frame, in input order."""
        grouped: dict[int, list[int]] = {}
        for i, det in enumerate(self.detections):
            grouped.setdefault(det.frame, []).append(i)
        return grouped


@dataclass
class VideoData:
    """A manifest together with its feature store and source directory."""

    manifest: VideoManifest
    features: FeatureStore
    path: Path
    split: str = ""  # "train" / "test" when loaded through load_dataset


@dataclass
class Dataset:
    root: Path
    prompt_pool_raw: list[dict]
    train: list[VideoData]
    test: list[VideoData]

    @property
    def feature_dim(self) -> int:
        return (self.train + self.test)[0].features.dim

    def all_videos(self) -> list[VideoData]:
        return self.train + self.test


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise DatasetError(message)


def _parse_detection(record: dict, line_no: int, path: Path) -> Detection:
    where = f"{path}:{line_no}"
    for key in ("frame", "bbox", "confidence", "feature_ref"):
        _require(key in record, f"{where}: missing field '{key}'")
    frame = record["frame"]
    _require(isinstance(frame, int) and frame >= 0, f"{where}: frame must be a non-negative integer")
    raw_box = record["bbox"]
    _require(isinstance(raw_box, list) and len(raw_box) == 4, f"{where}: bbox must be [x1, y1, x2, y2]")
    try:
        bbox = BBox(*[float(v) for v in raw_box])
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"{where}: invalid bbox: {exc}") from exc
    conf = record["confidence"]
    _require(
        isinstance(conf, (int, float)) and math.isfinite(conf) and 0.0 <= conf <= 1.0,
        f"{where}: confidence must be in [0, 1]",
    )
    ref = record["feature_ref"]
    _require(isinstance(ref, int) and ref >= 0, f"{where}: feature_ref must be a non-negative integer")
    answers = record.get("answers", {})
    _require(
        isinstance(answers, dict)
        and all(isinstance(k, str) and isinstance(v, str) for k, v in answers.items()),
        f"{where}: answers must map prompt_id to answer token",
    )
    return Detection(frame=frame, bbox=bbox, confidence=float(conf), feature_ref=ref, answers=answers)


def _load_features(video_dir: Path) -> FeatureStore:
    index_path = video_dir / FEATURES_INDEX_FILE
    bin_path = video_dir / FEATURES_FILE
    _require(index_path.is_file(), f"{index_path}: missing feature index")
    _require(bin_path.is_file(), f"{bin_path}: missing feature store")
    index = read_json(index_path)
    dim = index.get("dim")
    rows = index.get("rows")
    _require(isinstance(dim, int) and dim >= 1, f"{index_path}: dim must be a positive integer")
    _require(isinstance(rows, int) and rows >= 0, f"{index_path}: rows must be a non-negative integer")
    raw = bin_path.read_bytes()
    expected = dim * rows * 4
    _require(
        len(raw) == expected,
        f"{bin_path}: size mismatch: expected {expected} bytes for {rows}x{dim} float32, got {len(raw)}",
    )
    data = np.frombuffer(raw, dtype="<f4").reshape(rows, dim)
    _require(bool(np.isfinite(data).all()), f"{bin_path}: non-finite feature value")
    return FeatureStore(rows=data)


def load_manifest(
    path: Path | str,
    prompt_ids: set[str] | None = None,
) -> tuple[VideoManifest, FeatureStore]:
    """Load and fully validate one video directory.

    When prompt_ids is given, every answer key must belong to it. Box
    coordinates are clamped to the image bounds before validation.
    """
    video_dir = Path(path)
    _require(video_dir.is_dir(), f"{video_dir}: not a directory")
    manifest_path = video_dir / MANIFEST_FILE
    _require(manifest_path.is_file(), f"{manifest_path}: missing manifest")
    raw = read_json(manifest_path)
    for key in ("video_id", "frame_count", "image_width", "image_height"):
        _require(key in raw, f"{manifest_path}: missing field '{key}'")
    frame_count = raw["frame_count"]
    width = raw["image_width"]
    height = raw["image_height"]
    _require(isinstance(frame_count, int) and frame_count >= 1, f"{manifest_path}: frame_count must be positive")
    _require(isinstance(width, int) and width >= 1, f"{manifest_path}: image_width must be positive")
    _require(isinstance(height, int) and height >= 1, f"{manifest_path}: image_height must be positive")

    features = _load_features(video_dir)

    detections: list[Detection] = []
    det_path = video_dir / DETECTIONS_FILE
    _require(det_path.is_file(), f"{det_path}: missing detections file")
    prev_frame = -1
    with det_path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except ValueError as exc:
                raise DatasetError(f"{det_path}:{line_no}: malformed record: {exc}") from exc
            det = _parse_detection(record, line_no, det_path)
            where = f"{det_path}:{line_no}"
            _require(det.frame < frame_count, f"{where}: frame {det.frame} >= frame_count {frame_count}")
            _require(det.frame >= prev_frame, f"{where}: detections not sorted by frame")
            prev_frame = det.frame
            _require(
                det.feature_ref < features.row_count,
                f"{where}: feature_ref out of range ({det.feature_ref} >= {features.row_count})",
            )
            clamped = BBox(
                max(0.0, min(det.bbox.x1, width)),
                max(0.0, min(det.bbox.y1, height)),
                max(0.0, min(det.bbox.x2, width)),
                max(0.0, min(det.bbox.y2, height)),
            )
            if prompt_ids is not None:
                for pid in det.answers:
                    _require(pid in prompt_ids, f"{where}: answer for unknown prompt '{pid}'")
            detections.append(
                Detection(det.frame, clamped, det.confidence, det.feature_ref, det.answers)
            )

    declared = raw.get("detection_count")
    if declared is not None:
        _require(
            declared == len(detections),
            f"{manifest_path}: detection_count {declared} != actual {len(detections)}",
        )

    labels: list[int] | None = None
    labels_path = video_dir / LABELS_FILE
    if labels_path.is_file():
        raw_labels = read_json(labels_path)
        _require(isinstance(raw_labels, list), f"{labels_path}: labels must be a list")
        _require(
            len(raw_labels) == frame_count,
            f"{labels_path}: expected {frame_count} labels, got {len(raw_labels)}",
        )
        _require(all(v in (0, 1) for v in raw_labels), f"{labels_path}: labels must be 0 or 1")
        labels = [int(v) for v in raw_labels]

    known = {"video_id", "frame_count", "image_width", "image_height", "detection_count"}
    extra = {k: v for k, v in raw.items() if k not in known}
    manifest = VideoManifest(
        video_id=str(raw["video_id"]),
        frame_count=frame_count,
        image_width=width,
        image_height=height,
        detections=detections,
        labels=labels,
        extra=extra,
    )
    return manifest, features


def save_video(manifest: VideoManifest, features: FeatureStore, video_dir: Path | str) -> None:
    """Write one video directory in the canonical byte-exact layout."""
    out = Path(video_dir)
    out.mkdir(parents=True, exist_ok=True)
    head = {
        "video_id": manifest.video_id,
        "frame_count": manifest.frame_count,
        "image_width": manifest.image_width,
        "image_height": manifest.image_height,
        "detection_count": len(manifest.detections),
    }
    head.update(manifest.extra)
    write_text(out / MANIFEST_FILE, canonical_json(head))

    lines = []
    for det in manifest.detections:
        lines.append(
            canonical_jsonl_line(
                {
                    "frame": det.frame,
                    "bbox": [det.bbox.x1, det.bbox.y1, det.bbox.x2, det.bbox.y2],
                    "confidence": det.confidence,
                    "feature_ref": det.feature_ref,
                    "answers": det.answers,
                }
            )
        )
    write_text(out / DETECTIONS_FILE, "".join(lines))

    rows = np.ascontiguousarray(features.rows, dtype="<f4")
    (out / FEATURES_FILE).write_bytes(rows.tobytes())
    write_text(
        out / FEATURES_INDEX_FILE,
        canonical_json({"dim": features.dim, "rows": features.row_count}),
    )
    if manifest.labels is not None:
        write_text(out / LABELS_FILE, canonical_json(manifest.labels))


def load_prompt_pool_raw(root: Path) -> list[dict]:
    pool_path = Path(root) / PROMPT_POOL_FILE
    _require(pool_path.is_file(), f"{pool_path}: missing prompt pool")
    raw = read_json(pool_path)
    prompts = raw.get("prompts")
    _require(isinstance(prompts, list) and len(prompts) >= 1, f"{pool_path}: pool must be non-empty")
    seen: set[str] = set()
    for entry in prompts:
        _require(
            isinstance(entry, dict) and isinstance(entry.get("prompt_id"), str),
            f"{pool_path}: each prompt needs a string prompt_id",
        )
        pid = entry["prompt_id"]
        _require(pid not in seen, f"{pool_path}: duplicate prompt_id '{pid}'")
        seen.add(pid)
    return prompts


def load_dataset(root: Path | str, require_test_labels: bool = True) -> Dataset:
    """Load every video under <root>/train and <root>/test, validating all of it.

    Feature dimensions must agree across the dataset. Videos are loaded in
    sorted directory order so downstream processing is deterministic.
    """
    root = Path(root)
    _require(root.is_dir(), f"{root}: not a directory")
    prompts = load_prompt_pool_raw(root)
    prompt_ids = {p["prompt_id"] for p in prompts}

    splits: dict[str, list[VideoData]] = {TRAIN_DIR: [], TEST_DIR: []}
    for split in (TRAIN_DIR, TEST_DIR):
        split_dir = root / split
        if not split_dir.is_dir():
            continue
        for video_dir in sorted(p for p in split_dir.iterdir() if p.is_dir()):
            manifest, features = load_manifest(video_dir, prompt_ids=prompt_ids)
            if split == TEST_DIR and require_test_labels:
                _require(manifest.labels is not None, f"{video_dir}: test video is missing {LABELS_FILE}")
            splits[split].append(VideoData(manifest, features, video_dir, split=split))

    videos = splits[TRAIN_DIR] + splits[TEST_DIR]
    _require(len(videos) >= 1, f"{root}: dataset contains no videos")
    dims = {v.features.dim for v in videos}
    _require(len(dims) == 1, f"{root}: inconsistent feature dims across videos: {sorted(dims)}")
    seen_ids: set[str] = set()
    for v in videos:
        _require(v.manifest.video_id not in seen_ids, f"{root}: duplicate video_id '{v.manifest.video_id}'")
        seen_ids.add(v.manifest.video_id)
    return Dataset(root=root, prompt_pool_raw=prompts, train=splits[TRAIN_DIR], test=splits[TEST_DIR])
