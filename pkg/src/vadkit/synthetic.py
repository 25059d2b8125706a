"""Synthetic dataset generation with planted, fully known anomalies.

Normal object features follow a stable linear recurrence f_{t+1} = M f_t +
noise; inside a dynamics-anomaly window a second matrix M' with a guaranteed
Frobenius gap drives the affected object instead. Caption answers are drawn
from a normal distribution over tokens, switched to a far-away distribution
inside caption-anomaly windows. Boxes ride smooth non-overlapping lanes so
tracking is unambiguous, and frame labels are exactly the indicator of the
configured windows. The generated directory is the ingest layout plus a
ground_truth.json recording the hidden matrices and windows.

Everything is drawn from one labeled sub-seed in a documented order, so a
fixed config regenerates byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vadkit._util import canonical_json, rng_for, write_text
from vadkit.dataset import (
    PROMPT_POOL_FILE,
    TEST_DIR,
    TRAIN_DIR,
    Detection,
    FeatureStore,
    VideoManifest,
    save_video,
)
from vadkit.errors import ConfigError
from vadkit.geometry import BBox

GROUND_TRUTH_FILE = "ground_truth.json"

WINDOW_KINDS = ("dynamics", "caption", "both")

# Lane geometry. Fixed rather than configurable: the boxes only need to be
# plausible and collision-free, not tunable.
BOX_WIDTH = 48.0
BOX_HEIGHT = 64.0
LANE_MARGIN = 16.0
EDGE_MARGIN = 16.0
MIN_LANE_GAP = 8.0
BASE_SPEED = 3.0
SPEED_STEP = 2.0

# Answer distributions are ((prompt_id, ((token, weight), ...)), ...) so the
# config stays immutable; weights must sum to 1 per prompt.
AnswerTable = tuple[tuple[str, tuple[tuple[str, float], ...]], ...]

DEFAULT_PROMPTS: tuple[tuple[str, str], ...] = (
    ("action", "what is the person doing"),
    ("location", "where is the person"),
    ("count", "how many people are nearby"),
)

DEFAULT_NORMAL_ANSWERS: AnswerTable = (
    ("action", (("walking", 1.0),)),
    ("location", (("sidewalk", 0.6), ("road", 0.4))),
    ("count", (("one", 0.9), ("two", 0.1))),
)

# Only the action prompt separates the two regimes (total variation 1.0);
# the other prompts stay identical so prompt selection has signal to find.
DEFAULT_ANOMALOUS_ANSWERS: AnswerTable = (
    ("action", (("fighting", 0.7), ("cycling", 0.3))),
    ("location", (("sidewalk", 0.6), ("road", 0.4))),
    ("count", (("one", 0.9), ("two", 0.1))),
)


@dataclass(frozen=True)
class AnomalyWindow:
    """Half-open frame range [start, end) on one object of one video."""

    video_id: str
    object_index: int
    start: int
    end: int
    kind: str  # one of WINDOW_KINDS

    @property
    def affects_dynamics(self) -> bool:
        return self.kind in ("dynamics", "both")

    @property
    def affects_captions(self) -> bool:
        return self.kind in ("caption", "both")

    def as_record(self) -> dict:
        return {
            "video_id": self.video_id,
            "object_index": self.object_index,
            "start": self.start,
            "end": self.end,
            "kind": self.kind,
        }


DEFAULT_WINDOWS: tuple[AnomalyWindow, ...] = (
    AnomalyWindow("test_000", 0, 100, 130, "dynamics"),
    AnomalyWindow("test_001", 0, 60, 90, "caption"),
    AnomalyWindow("test_002", 1, 40, 70, "dynamics"),
    AnomalyWindow("test_003", 2, 140, 170, "caption"),
)


def derive_windows(test_videos: int, frames: int, objects: int) -> tuple[AnomalyWindow, ...]:
    """Windows for a non-standard shape: one per test video, evenly spaced,
    alternating dynamics and caption, cycling the affected object, roughly
    15% of the video long."""
    length = max(1, round(0.15 * frames))
    windows = []
    for i in range(test_videos):
        start = round((i + 1) * (frames - length) / (test_videos + 1))
        windows.append(
            AnomalyWindow(
                video_id=f"test_{i:03d}",
                object_index=i % objects,
                start=start,
                end=min(start + length, frames),
                kind="dynamics" if i % 2 == 0 else "caption",
            )
        )
    return tuple(windows)


@dataclass(frozen=True)
class SynthConfig:
    """Full description of one synthetic dataset; defaults are the standard
    acceptance instance."""

    seed: int = 7
    train_videos: int = 8
    test_videos: int = 4
    frames_per_video: int = 200
    objects_per_video: int = 3
    feature_dim: int = 16
    spectral_radius: float = 0.8
    noise_std: float = 0.05
    min_transition_gap: float = 1.0
    image_width: int = 640
    image_height: int = 480
    prompts: tuple[tuple[str, str], ...] = DEFAULT_PROMPTS
    normal_answers: AnswerTable = DEFAULT_NORMAL_ANSWERS
    anomalous_answers: AnswerTable = DEFAULT_ANOMALOUS_ANSWERS
    windows: tuple[AnomalyWindow, ...] = DEFAULT_WINDOWS

    def train_ids(self) -> tuple[str, ...]:
        return tuple(f"train_{i:03d}" for i in range(self.train_videos))

    def test_ids(self) -> tuple[str, ...]:
        return tuple(f"test_{i:03d}" for i in range(self.test_videos))


def total_variation(p: tuple[tuple[str, float], ...], q: tuple[tuple[str, float], ...]) -> float:
    """Total variation distance between two finite token distributions."""
    pm = dict(p)
    qm = dict(q)
    tokens = sorted(set(pm) | set(qm))
    return 0.5 * sum(abs(pm.get(tok, 0.0) - qm.get(tok, 0.0)) for tok in tokens)


def _check_answer_table(table: AnswerTable, prompt_ids: tuple[str, ...], name: str) -> None:
    seen = tuple(pid for pid, _ in table)
    if seen != prompt_ids:
        raise ConfigError(f"{name} must cover exactly the prompt pool, in order")
    for pid, entries in table:
        if not entries:
            raise ConfigError(f"{name}[{pid}]: empty distribution")
        total = 0.0
        for token, weight in entries:
            if not token:
                raise ConfigError(f"{name}[{pid}]: empty token")
            if weight <= 0.0:
                raise ConfigError(f"{name}[{pid}]: weight for '{token}' must be positive")
            total += weight
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"{name}[{pid}]: weights sum to {total}, expected 1")


def validate_config(cfg: SynthConfig) -> None:
    """Raise ConfigError on any violated invariant."""
    if cfg.train_videos < 0 or cfg.test_videos < 0 or cfg.train_videos + cfg.test_videos < 1:
        raise ConfigError("need at least one video")
    if cfg.frames_per_video < 1:
        raise ConfigError("frames_per_video must be positive")
    if cfg.objects_per_video < 1:
        raise ConfigError("objects_per_video must be positive")
    if cfg.feature_dim < 1:
        raise ConfigError("feature_dim must be positive")
    if not 0.0 < cfg.spectral_radius <= 0.9:
        raise ConfigError("spectral_radius must be in (0, 0.9]")
    if cfg.noise_std < 0.0:
        raise ConfigError("noise_std must be non-negative")
    if cfg.min_transition_gap < 0.0:
        raise ConfigError("min_transition_gap must be non-negative")

    prompt_ids = tuple(pid for pid, _ in cfg.prompts)
    if not prompt_ids:
        raise ConfigError("prompt pool must be non-empty")
    if len(set(prompt_ids)) != len(prompt_ids):
        raise ConfigError("duplicate prompt_id in prompt pool")
    _check_answer_table(cfg.normal_answers, prompt_ids, "normal_answers")
    _check_answer_table(cfg.anomalous_answers, prompt_ids, "anomalous_answers")

    _lane_tops(cfg)  # raises when objects cannot fit without overlap

    test_ids = set(cfg.test_ids())
    caption_gap = max(
        total_variation(dict(cfg.normal_answers)[pid], dict(cfg.anomalous_answers)[pid])
        for pid in prompt_ids
    )
    for win in cfg.windows:
        where = f"window {win.video_id}[{win.start}, {win.end})"
        if win.kind not in WINDOW_KINDS:
            raise ConfigError(f"{where}: unknown kind '{win.kind}'")
        if win.video_id not in test_ids:
            raise ConfigError(f"{where}: windows must target test videos")
        if not 0 <= win.object_index < cfg.objects_per_video:
            raise ConfigError(f"{where}: object_index out of range")
        if not 0 <= win.start < win.end <= cfg.frames_per_video:
            raise ConfigError(f"{where}: frame range outside video bounds")
        if win.affects_captions and caption_gap < 0.5:
            raise ConfigError(
                f"{where}: normal and anomalous caption distributions are too close "
                f"(max total variation {caption_gap:.3f} < 0.5)"
            )


def _lane_tops(cfg: SynthConfig) -> list[float]:
    """Vertical lane positions; one lane per object, no overlap possible."""
    usable = cfg.image_height - 2.0 * LANE_MARGIN - BOX_HEIGHT
    if cfg.objects_per_video == 1:
        if usable < 0.0:
            raise ConfigError("image_height too small for the object box")
        return [LANE_MARGIN + usable / 2.0]
    pitch = usable / (cfg.objects_per_video - 1)
    if pitch < BOX_HEIGHT + MIN_LANE_GAP:
        raise ConfigError(
            f"{cfg.objects_per_video} objects do not fit in image_height "
            f"{cfg.image_height} without overlapping lanes"
        )
    return [LANE_MARGIN + i * pitch for i in range(cfg.objects_per_video)]


def _stable_random_matrix(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    """Gaussian square matrix rescaled to the requested spectral radius."""
    for _ in range(100):
        raw = rng.standard_normal((dim, dim))
        top = float(np.max(np.abs(np.linalg.eigvals(raw))))
        if top > 1e-12:
            return raw * (radius / top)
    raise ConfigError("could not draw a matrix with nonzero spectral radius")


def _draw_transitions(
    rng: np.random.Generator, cfg: SynthConfig
) -> tuple[np.ndarray, np.ndarray]:
    normal = _stable_random_matrix(rng, cfg.feature_dim, cfg.spectral_radius)
    for _ in range(100):
        anomalous = _stable_random_matrix(rng, cfg.feature_dim, cfg.spectral_radius)
        if float(np.linalg.norm(normal - anomalous)) >= cfg.min_transition_gap:
            return normal, anomalous
    raise ConfigError(
        f"could not draw anomalous dynamics at least {cfg.min_transition_gap} away "
        "(Frobenius) from the normal dynamics"
    )


def _draw_token(rng: np.random.Generator, entries: tuple[tuple[str, float], ...]) -> str:
    # Inverse-CDF walk instead of rng.choice: one uniform per draw, stable
    # across numpy versions.
    u = rng.random()
    acc = 0.0
    for token, weight in entries:
        acc += weight
        if u < acc:
            return token
    return entries[-1][0]


def _triangle(pos: float, span: float) -> float:
    """Bounce pos into [0, span] by reflecting at both ends."""
    if span <= 0.0:
        return 0.0
    period = 2.0 * span
    rem = pos % period
    return rem if rem <= span else period - rem


def _simulate_features(
    rng: np.random.Generator,
    cfg: SynthConfig,
    normal: np.ndarray,
    anomalous: np.ndarray,
    dynamics_frames: set[int],
) -> np.ndarray:
    """One object's feature sequence (frames, dim).

    Frame t > 0 is produced by the anomalous matrix exactly when t lies in a
    dynamics window, so the first off-model transition lands on the first
    labeled frame.
    """
    out = np.empty((cfg.frames_per_video, cfg.feature_dim), dtype=np.float64)
    out[0] = rng.standard_normal(cfg.feature_dim)
    for t in range(1, cfg.frames_per_video):
        matrix = anomalous if t in dynamics_frames else normal
        noise = rng.standard_normal(cfg.feature_dim) if cfg.noise_std > 0.0 else 0.0
        out[t] = matrix @ out[t - 1] + cfg.noise_std * noise
    return out


def generate(cfg: SynthConfig, root: Path | str) -> dict:
    """Write a complete dataset under root and return the ground truth payload.

    Layout: prompt_pool.json, ground_truth.json, train/<id>/..., test/<id>/...
    Train videos are normal only and carry no labels; every test video gets a
    labels.json that is exactly the indicator of its windows.
    """
    validate_config(cfg)
    root = Path(root)
    rng = rng_for(cfg.seed, "synthgen")
    normal, anomalous = _draw_transitions(rng, cfg)
    lanes = _lane_tops(cfg)
    span_x = cfg.image_width - BOX_WIDTH - 2.0 * EDGE_MARGIN
    if span_x < 0.0:
        raise ConfigError("image_width too small for the object box")

    pool = {"prompts": [{"prompt_id": pid, "text": text} for pid, text in cfg.prompts]}
    write_text(root / PROMPT_POOL_FILE, canonical_json(pool))

    windows_by_video: dict[str, list[AnomalyWindow]] = {}
    for win in cfg.windows:
        windows_by_video.setdefault(win.video_id, []).append(win)

    for split, video_ids, labeled in (
        (TRAIN_DIR, cfg.train_ids(), False),
        (TEST_DIR, cfg.test_ids(), True),
    ):
        for video_id in video_ids:
            video_windows = windows_by_video.get(video_id, [])
            _generate_video(
                rng, cfg, normal, anomalous, lanes, span_x,
                video_id, video_windows, labeled, root / split / video_id,
            )

    truth = {
        "seed": cfg.seed,
        "normal_transition": normal.tolist(),
        "anomalous_transition": anomalous.tolist(),
        "windows": [win.as_record() for win in cfg.windows],
    }
    write_text(root / GROUND_TRUTH_FILE, canonical_json(truth))
    return truth


def _generate_video(
    rng: np.random.Generator,
    cfg: SynthConfig,
    normal: np.ndarray,
    anomalous: np.ndarray,
    lanes: list[float],
    span_x: float,
    video_id: str,
    windows: list[AnomalyWindow],
    labeled: bool,
    video_dir: Path,
) -> None:
    frames = cfg.frames_per_video
    objects = cfg.objects_per_video

    # Draw order per video: phases, then per object features, then captions.
    phases = rng.uniform(0.0, 2.0 * max(span_x, 1.0), size=objects)

    features = []
    for obj in range(objects):
        dynamics_frames = {
            t
            for win in windows
            if win.object_index == obj and win.affects_dynamics
            for t in range(win.start, win.end)
        }
        features.append(_simulate_features(rng, cfg, normal, anomalous, dynamics_frames))

    answers = []
    normal_table = dict(cfg.normal_answers)
    anomalous_table = dict(cfg.anomalous_answers)
    for obj in range(objects):
        caption_frames = {
            t
            for win in windows
            if win.object_index == obj and win.affects_captions
            for t in range(win.start, win.end)
        }
        per_frame = []
        for t in range(frames):
            table = anomalous_table if t in caption_frames else normal_table
            per_frame.append(
                {pid: _draw_token(rng, table[pid]) for pid, _ in cfg.prompts}
            )
        answers.append(per_frame)

    detections: list[Detection] = []
    rows = np.empty((frames * objects, cfg.feature_dim), dtype=np.float64)
    ref = 0
    for t in range(frames):
        for obj in range(objects):
            x1 = EDGE_MARGIN + _triangle(phases[obj] + (BASE_SPEED + SPEED_STEP * obj) * t, span_x)
            y1 = lanes[obj]
            rows[ref] = features[obj][t]
            detections.append(
                Detection(
                    frame=t,
                    bbox=BBox(x1, y1, x1 + BOX_WIDTH, y1 + BOX_HEIGHT),
                    confidence=0.9,
                    feature_ref=ref,
                    answers=answers[obj][t],
                )
            )
            ref += 1

    labels = None
    if labeled:
        flags = [0] * frames
        for win in windows:
            for t in range(win.start, win.end):
                flags[t] = 1
        labels = flags

    manifest = VideoManifest(
        video_id=video_id,
        frame_count=frames,
        image_width=cfg.image_width,
        image_height=cfg.image_height,
        detections=detections,
        labels=labels,
    )
    save_video(manifest, FeatureStore(rows=rows.astype("<f4")), video_dir)


def acceptance_config() -> SynthConfig:
    """The standard instance every regression baseline is pinned against."""
    return SynthConfig()


def noiseless_config(seed: int = 7) -> SynthConfig:
    """Noise-free variant: features follow the hidden dynamics exactly."""
    return SynthConfig(seed=seed, noise_std=0.0)
