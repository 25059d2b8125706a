"""Shared builders and the session-wide pipeline run used by several suites."""

from __future__ import annotations

import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from vadkit.dataset import Detection, FeatureStore, VideoManifest
from vadkit.geometry import BBox


def make_detection(
    frame: int,
    box: tuple[float, float, float, float] = (0.0, 0.0, 10.0, 10.0),
    confidence: float = 0.9,
    feature_ref: int = 0,
    answers: dict[str, str] | None = None,
) -> Detection:
    return Detection(
        frame=frame,
        bbox=BBox(*box),
        confidence=confidence,
        feature_ref=feature_ref,
        answers=dict(answers or {}),
    )


def make_manifest(
    detections: list[Detection],
    video_id: str = "v0",
    frame_count: int | None = None,
    image_width: int = 640,
    image_height: int = 480,
    labels: list[int] | None = None,
) -> VideoManifest:
    if frame_count is None:
        frame_count = max((d.frame for d in detections), default=-1) + 1
    return VideoManifest(
        video_id=video_id,
        frame_count=frame_count,
        image_width=image_width,
        image_height=image_height,
        detections=detections,
        labels=labels,
    )


def make_store(rows) -> FeatureStore:
    arr = np.asarray(rows, dtype=np.float32)
    assert arr.ndim == 2
    return FeatureStore(rows=arr)


def run_cli(args: list[str], cwd: Path | None = None) -> subprocess.CompletedProcess:
    """Invoke the CLI in a subprocess so artifacts match real user runs."""
    return subprocess.run(
        [sys.executable, "-m", "vadkit.cli", *[str(a) for a in args]],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


@dataclass
class AcceptanceRun:
    data_dir: Path
    out_dir: Path
    synth_seconds: float
    run_seconds: float


@pytest.fixture(scope="session")
def acceptance_run(tmp_path_factory) -> AcceptanceRun:
    """Default synthetic instance plus one full pipeline run over it.

    Built once per session; generation and scoring go through the CLI in a
    fresh interpreter, so every consumer sees exactly the artifacts a user
    would get from `vadkit synth` followed by `vadkit run`.
    """
    base = tmp_path_factory.mktemp("acceptance")
    data_dir = base / "data"
    out_dir = base / "out"

    t0 = time.perf_counter()
    synth = run_cli(["synth", "--out", data_dir])
    t1 = time.perf_counter()
    assert synth.returncode == 0, synth.stderr

    run = run_cli(["run", "--data", data_dir, "--out", out_dir])
    t2 = time.perf_counter()
    assert run.returncode == 0, run.stderr

    return AcceptanceRun(
        data_dir=data_dir,
        out_dir=out_dir,
        synth_seconds=t1 - t0,
        run_seconds=t2 - t1,
    )
