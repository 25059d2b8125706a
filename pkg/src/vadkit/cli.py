"""Command-line driver.

Subcommands: validate, track, spa-fit, s3m-train, score, eval, synth, run.
Every stage writes its artifacts under <out>/<stage>/ and later stages read
them back, so the pipeline can run end to end (`run`) or one checkpointed
stage at a time.

Configuration precedence, lowest to highest: built-in defaults, --config
file (key=value text or an effective_config.json echo), --set key=value
pairs, then the dedicated flags (--data, --out, --seed, --jobs). The
VADKIT_LOG environment variable sets log verbosity (debug, info, warning,
error; default warning).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from vadkit import __version__
from vadkit.config import PipelineConfig, build_config, load_config_file, parse_overrides
from vadkit.errors import ConfigError, VadkitError
from vadkit.pipeline import (
    load_pipeline_dataset,
    load_stage_s3m,
    load_stage_spa,
    load_stage_tracks,
    run_pipeline,
    stage_eval,
    stage_s3m_train,
    stage_score,
    stage_spa_fit,
    stage_track,
    stage_validate,
)
from vadkit.synthetic import SynthConfig, derive_windows, generate

logger = logging.getLogger("vadkit")


def _add_pipeline_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help="dataset root directory")
    parser.add_argument("--out", help="output directory for stage artifacts")
    parser.add_argument("--config", help="config file (key=value or effective_config.json)")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key; repeatable",
    )
    parser.add_argument("--seed", type=int, help="top-level random seed")
    parser.add_argument("--jobs", type=int, help="videos scored in parallel")


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    file_mapping = load_config_file(args.config) if args.config else None
    overrides = parse_overrides(args.overrides)
    if args.data is not None:
        overrides["dataset_root"] = args.data
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    return build_config(file_mapping, overrides)


def _require_out(cfg: PipelineConfig) -> str:
    if not cfg.out_dir:
        raise ConfigError("out_dir is not set (--out or out_dir in config)")
    return cfg.out_dir


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    dataset = load_pipeline_dataset(cfg)
    report = stage_validate(dataset, cfg.out_dir or None)
    total = sum(v["detections"] for split in report["splits"].values() for v in split)
    print(
        f"ok: {len(dataset.train)} train + {len(dataset.test)} test videos, "
        f"feature dim {report['feature_dim']}, {total} detections"
    )
    return 0


def _cmd_track(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = _require_out(cfg)
    dataset = load_pipeline_dataset(cfg)
    tracks = stage_track(dataset, cfg, out)
    total = sum(len(t) for t in tracks.values())
    print(f"tracked {len(tracks)} videos, {total} tracks -> {out}/track")
    return 0


def _cmd_spa_fit(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = _require_out(cfg)
    dataset = load_pipeline_dataset(cfg)
    model = stage_spa_fit(dataset, cfg, out)
    print(f"selected prompt '{model.prompt_id}' -> {out}/spa")
    return 0


def _cmd_s3m_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = _require_out(cfg)
    dataset = load_pipeline_dataset(cfg)
    tracks = load_stage_tracks(dataset, out)
    result = stage_s3m_train(dataset, tracks, cfg, out)
    print(
        f"trained on {result.params.feature_dim}-dim features, "
        f"final epoch loss {result.epoch_losses[-1]:.6g} -> {out}/s3m"
    )
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = _require_out(cfg)
    dataset = load_pipeline_dataset(cfg)
    tracks = load_stage_tracks(dataset, out)
    spa_model = load_stage_spa(out)
    params = load_stage_s3m(out)
    results = stage_score(dataset, tracks, spa_model, params, cfg, out)
    print(f"scored {len(results)} test videos -> {out}/scores")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    out = _require_out(cfg)
    dataset = load_pipeline_dataset(cfg)
    report = stage_eval(dataset, out)
    micro = report["columns"]["final"]["micro_auc"]
    print(f"micro AUC (final): {micro:.6f} -> {out}/eval/report.json")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    report = run_pipeline(cfg)
    micro = report["columns"]["final"]["micro_auc"]
    print(f"micro AUC (final): {micro:.6f} -> {cfg.out_dir}/eval/report.json")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthConfig()
    updates = {
        "seed": args.seed,
        "train_videos": args.train_videos,
        "test_videos": args.test_videos,
        "frames_per_video": args.frames,
        "objects_per_video": args.objects,
        "feature_dim": args.feature_dim,
        "noise_std": args.noise_std,
    }
    cfg = dataclasses.replace(cfg, **{k: v for k, v in updates.items() if v is not None})
    # The standard windows assume the default shape; rederive when it changes.
    shape_changed = any(v is not None for v in (args.test_videos, args.frames, args.objects))
    if shape_changed:
        cfg = dataclasses.replace(
            cfg,
            windows=derive_windows(cfg.test_videos, cfg.frames_per_video, cfg.objects_per_video),
        )
    generate(cfg, args.out)
    print(
        f"wrote synthetic dataset to {args.out} "
        f"({cfg.train_videos} train + {cfg.test_videos} test videos, seed {cfg.seed})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vadkit",
        description="Object-level video anomaly detection on precomputed detections and features.",
    )
    parser.add_argument("--version", action="version", version=f"vadkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    specs = [
        ("validate", "load and fully check a dataset", _cmd_validate),
        ("track", "associate detections into tracks", _cmd_track),
        ("spa-fit", "fit the caption-frequency static scorer", _cmd_spa_fit),
        ("s3m-train", "train the temporal prediction model", _cmd_s3m_train),
        ("score", "score test videos with both models", _cmd_score),
        ("eval", "evaluate scores against frame labels", _cmd_eval),
        ("run", "run the full pipeline end to end", _cmd_run),
    ]
    for name, help_text, handler in specs:
        cmd = sub.add_parser(name, help=help_text)
        _add_pipeline_args(cmd)
        cmd.set_defaults(handler=handler)

    synth = sub.add_parser("synth", help="generate a synthetic dataset with known ground truth")
    synth.add_argument("--out", required=True, help="dataset root to create")
    synth.add_argument("--seed", type=int, help="generator seed (default 7)")
    synth.add_argument("--train-videos", type=int, help="number of train videos")
    synth.add_argument("--test-videos", type=int, help="number of test videos")
    synth.add_argument("--frames", type=int, help="frames per video")
    synth.add_argument("--objects", type=int, help="objects per video")
    synth.add_argument("--feature-dim", type=int, help="feature dimension")
    synth.add_argument("--noise-std", type=float, help="observation noise std")
    synth.set_defaults(handler=_cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("VADKIT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except VadkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
