"""End-to-end driver: each stage reads the previous stage's artifacts.

Artifact layout under the output directory:

    effective_config.json       full resolved configuration (run only)
    validate/report.json        dataset summary
    track/<video_id>.jsonl      tracks for every video
    track/summary.json          per-video track counts
    spa/spa_model.json          selected prompt + answer counts
    s3m/model.bin               trained temporal model
    s3m/train_log.json          per-epoch training losses
    scores/<video_id>.csv       frame scores for every test video
    eval/report.json            AUC / AP per score column
    eval/roc.csv                pooled ROC curve of the final score

Stages are idempotent: re-running with the same inputs and seed rewrites
byte-identical artifacts.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from vadkit._util import canonical_json, format_float, write_text
from vadkit.config import PipelineConfig, validate_pipeline_config
from vadkit.dataset import Dataset, VideoData, load_dataset
from vadkit.errors import ConfigError, MetricsError, PipelineError
from vadkit.fusion import (
    SCORE_COLUMNS,
    ScoreSeries,
    frame_max_pool,
    fuse,
    gaussian_smooth,
    minmax_normalize,
    minmax_normalize_pooled,
    read_scores_csv,
    write_scores_csv,
)
from vadkit.metrics import LabeledScores, average_precision, macro_auc, micro_auc, roc_points
from vadkit.s3m import (
    S3MParams,
    TrainResult,
    load_params,
    save_params,
    temporal_score,
    train,
)
from vadkit.spa import PromptPool, SpaModel
from vadkit.tracking import Track, build_tracks, load_tracks, save_tracks, segment_clips

logger = logging.getLogger("vadkit.pipeline")

EFFECTIVE_CONFIG_FILE = "effective_config.json"
SPA_MODEL_FILE = "spa_model.json"
S3M_MODEL_FILE = "model.bin"
S3M_LOG_FILE = "train_log.json"
EVAL_REPORT_FILE = "report.json"
EVAL_ROC_FILE = "roc.csv"


def _stage_dir(out_root: Path | str, stage: str) -> Path:
    path = Path(out_root) / stage
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_pipeline_dataset(cfg: PipelineConfig) -> Dataset:
    """Load the configured dataset root; labels stay optional until eval."""
    if not cfg.dataset_root:
        raise ConfigError("dataset_root is not set")
    return load_dataset(cfg.dataset_root, require_test_labels=False)


def stage_validate(dataset: Dataset, out_root: Path | str | None = None) -> dict:
    """Summarize an already fully validated dataset (loading IS validation)."""
    splits = {}
    for split_name, videos in (("train", dataset.train), ("test", dataset.test)):
        splits[split_name] = [
            {
                "video_id": v.manifest.video_id,
                "frames": v.manifest.frame_count,
                "detections": len(v.manifest.detections),
                "labeled": v.manifest.labels is not None,
            }
            for v in videos
        ]
    report = {
        "feature_dim": dataset.feature_dim,
        "prompts": [p["prompt_id"] for p in dataset.prompt_pool_raw],
        "splits": splits,
    }
    if out_root is not None:
        write_text(_stage_dir(out_root, "validate") / "report.json", canonical_json(report))
    return report


def stage_track(dataset: Dataset, cfg: PipelineConfig, out_root: Path | str) -> dict[str, list[Track]]:
    """Associate detections into tracks for every video and checkpoint them."""
    track_dir = _stage_dir(out_root, "track")
    tracker_cfg = cfg.tracker_config()
    tracks_by_video: dict[str, list[Track]] = {}
    summary: dict[str, dict] = {}
    for video in dataset.all_videos():
        tracks = build_tracks(video.manifest, tracker_cfg)
        video_id = video.manifest.video_id
        tracks_by_video[video_id] = tracks
        save_tracks(tracks, track_dir / f"{video_id}.jsonl")
        summary[video_id] = {
            "tracks": len(tracks),
            "entries": sum(len(t) for t in tracks),
        }
    write_text(track_dir / "summary.json", canonical_json(summary))
    return tracks_by_video


def load_stage_tracks(dataset: Dataset, out_root: Path | str) -> dict[str, list[Track]]:
    """Read the track stage's checkpoints back for a later stage."""
    track_dir = Path(out_root) / "track"
    tracks_by_video: dict[str, list[Track]] = {}
    for video in dataset.all_videos():
        video_id = video.manifest.video_id
        path = track_dir / f"{video_id}.jsonl"
        if not path.is_file():
            raise PipelineError(f"{path}: missing tracks for '{video_id}'; run the track stage first")
        tracks_by_video[video_id] = load_tracks(path)
    return tracks_by_video


def stage_spa_fit(dataset: Dataset, cfg: PipelineConfig, out_root: Path | str) -> SpaModel:
    """Fit the caption-frequency model on the train split (assumed normal)."""
    if not dataset.train:
        raise PipelineError("no train videos: the static scorer needs a normal-only split")
    pool = PromptPool.from_raw(dataset.prompt_pool_raw)
    detections = [d for v in dataset.train for d in v.manifest.detections]
    model = SpaModel.fit(pool, detections, alpha=cfg.spa_alpha, normalize=cfg.spa_normalize)
    model.save(_stage_dir(out_root, "spa") / SPA_MODEL_FILE)
    return model


def load_stage_spa(out_root: Path | str) -> SpaModel:
    path = Path(out_root) / "spa" / SPA_MODEL_FILE
    if not path.is_file():
        raise PipelineError(f"{path}: missing static model; run the spa-fit stage first")
    return SpaModel.load(path)


def _train_clips(
    dataset: Dataset, tracks_by_video: dict[str, list[Track]], cfg: PipelineConfig
) -> list[np.ndarray]:
    """Training clip features from the train split, in deterministic order."""
    clips: list[np.ndarray] = []
    for video in dataset.train:
        for track in tracks_by_video[video.manifest.video_id]:
            for clip in segment_clips(track, video.manifest, video.features, cfg.clip_len, cfg.clip_stride):
                clips.append(clip.features)
    return clips


def stage_s3m_train(
    dataset: Dataset,
    tracks_by_video: dict[str, list[Track]],
    cfg: PipelineConfig,
    out_root: Path | str,
) -> TrainResult:
    """Train the temporal model on train-split clips and checkpoint it."""
    clips = _train_clips(dataset, tracks_by_video, cfg)
    if not clips:
        raise PipelineError(
            f"no training clips: no train track reaches clip_len {cfg.clip_len}"
        )
    result = train(clips, cfg.train_config(), cfg.state_dim)
    s3m_dir = _stage_dir(out_root, "s3m")
    save_params(result.params, s3m_dir / S3M_MODEL_FILE)
    log = {
        "clips": len(clips),
        "epoch_losses": result.epoch_losses,
        "feature_dim": result.params.feature_dim,
        "state_dim": result.params.state_dim,
    }
    write_text(s3m_dir / S3M_LOG_FILE, canonical_json(log))
    return result


def load_stage_s3m(out_root: Path | str) -> S3MParams:
    path = Path(out_root) / "s3m" / S3M_MODEL_FILE
    if not path.is_file():
        raise PipelineError(f"{path}: missing temporal model; run the s3m-train stage first")
    return load_params(path)


def raw_score_video(
    video: VideoData,
    tracks: list[Track],
    spa_model: SpaModel,
    params: S3MParams,
    cfg: PipelineConfig,
) -> tuple[ScoreSeries, ScoreSeries]:
    """Unnormalized static and temporal series for one video.

    Static: per-detection caption rarity, max-pooled per frame. Temporal:
    per-clip prediction error assigned to the predicted frames, max-pooled
    over covering clips and objects.
    """
    manifest = video.manifest
    video_id = manifest.video_id

    static_pairs = [(det.frame, spa_model.score(det)) for det in manifest.detections]
    static_raw = frame_max_pool(manifest.frame_count, static_pairs, video_id, kind="static")

    temporal_pairs: list[tuple[int, float]] = []
    for track in tracks:
        for clip in segment_clips(track, manifest, video.features, cfg.clip_len, cfg.clip_stride):
            errors = temporal_score(params, clip.features)
            for offset, value in enumerate(errors, start=1):
                temporal_pairs.append((clip.start_frame + offset, float(value)))
    temporal_raw = frame_max_pool(manifest.frame_count, temporal_pairs, video_id, kind="temporal")
    return static_raw, temporal_raw


def stage_score(
    dataset: Dataset,
    tracks_by_video: dict[str, list[Track]],
    spa_model: SpaModel,
    params: S3MParams,
    cfg: PipelineConfig,
    out_root: Path | str,
) -> dict[str, dict[str, ScoreSeries]]:
    """Score every test video and write one scores CSV per video.

    Components are min-max normalized before fusion. Scope "global" (the
    default) rescales each component once across the whole test set, so
    scores stay comparable when videos are pooled; scope "video" rescales
    each video on its own, which maximizes in-video contrast but lets one
    video's noise floor outrank another video's true anomalies. Fusion and
    smoothing always run per video.
    """
    if not dataset.test:
        raise PipelineError("no test videos to score")
    score_dir = _stage_dir(out_root, "scores")

    def one(video: VideoData) -> tuple[str, tuple[ScoreSeries, ScoreSeries]]:
        video_id = video.manifest.video_id
        raws = raw_score_video(video, tracks_by_video[video_id], spa_model, params, cfg)
        return video_id, raws

    if cfg.jobs > 1 and len(dataset.test) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            raws = dict(pool.map(one, dataset.test))
    else:
        raws = dict(one(v) for v in dataset.test)

    order = sorted(raws)
    statics = [raws[vid][0] for vid in order]
    temporals = [raws[vid][1] for vid in order]
    if cfg.normalize_scope == "global":
        statics = minmax_normalize_pooled(statics)
        temporals = minmax_normalize_pooled(temporals)
    else:
        statics = [minmax_normalize(s) for s in statics]
        temporals = [minmax_normalize(t) for t in temporals]

    results: dict[str, dict[str, ScoreSeries]] = {}
    for static, temporal in zip(statics, temporals):
        fused = fuse(static, temporal, cfg.fusion_weight)
        final = gaussian_smooth(fused, cfg.smooth_sigma)
        results[static.video_id] = {
            "static": static,
            "temporal": temporal,
            "fused": fused,
            "final": final,
        }
        write_scores_csv(
            score_dir / f"{static.video_id}.csv", static, temporal, fused, final
        )
    return results


def stage_eval(dataset: Dataset, out_root: Path | str) -> dict:
    """Compare score CSVs against frame labels; write report and ROC curve."""
    if not dataset.test:
        raise MetricsError("no test videos to evaluate")
    unlabeled = [v.manifest.video_id for v in dataset.test if v.manifest.labels is None]
    if unlabeled:
        raise MetricsError(f"labels required: missing for {', '.join(unlabeled)}")

    score_dir = Path(out_root) / "scores"
    per_column: dict[str, list[LabeledScores]] = {col: [] for col in SCORE_COLUMNS[1:]}
    videos_meta = []
    for video in dataset.test:
        video_id = video.manifest.video_id
        path = score_dir / f"{video_id}.csv"
        if not path.is_file():
            raise PipelineError(f"{path}: missing scores for '{video_id}'; run the score stage first")
        columns = read_scores_csv(path)
        labels = np.asarray(video.manifest.labels, dtype=np.int64)
        if columns["frame"].shape[0] != labels.shape[0]:
            raise MetricsError(
                f"{path}: {columns['frame'].shape[0]} scored frames but {labels.shape[0]} labels"
            )
        for col in per_column:
            per_column[col].append(LabeledScores(scores=columns[col], labels=labels))
        videos_meta.append(
            {
                "video_id": video_id,
                "frames": int(labels.shape[0]),
                "positives": int(labels.sum()),
            }
        )

    report_columns = {}
    for col, datasets in per_column.items():
        pooled = LabeledScores(
            scores=np.concatenate([d.scores for d in datasets]),
            labels=np.concatenate([d.labels for d in datasets]),
        )
        macro_mean, per_video = macro_auc(datasets)
        report_columns[col] = {
            "micro_auc": micro_auc(datasets),
            "macro_auc": macro_mean,
            "average_precision": average_precision(pooled),
        }
        for meta, video_auc in zip(videos_meta, per_video):
            meta[f"{col}_auc"] = video_auc

    final_pooled = LabeledScores(
        scores=np.concatenate([d.scores for d in per_column["final"]]),
        labels=np.concatenate([d.labels for d in per_column["final"]]),
    )
    curve = roc_points(final_pooled)
    eval_dir = _stage_dir(out_root, "eval")
    lines = ["threshold,fpr,tpr"]
    for threshold, fpr, tpr in curve:
        lines.append(f"{format_float(threshold)},{format_float(fpr)},{format_float(tpr)}")
    write_text(eval_dir / EVAL_ROC_FILE, "\n".join(lines) + "\n")

    report = {"columns": report_columns, "videos": videos_meta}
    write_text(eval_dir / EVAL_REPORT_FILE, canonical_json(report))
    return report


def run_pipeline(cfg: PipelineConfig) -> dict:
    """validate -> track -> spa-fit -> s3m-train -> score -> eval."""
    validate_pipeline_config(cfg)
    if not cfg.out_dir:
        raise ConfigError("out_dir is not set")
    out_root = Path(cfg.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    write_text(out_root / EFFECTIVE_CONFIG_FILE, canonical_json(cfg.as_mapping()))

    dataset = load_pipeline_dataset(cfg)
    stage_validate(dataset, out_root)
    logger.info("validated %d videos", len(dataset.all_videos()))
    tracks_by_video = stage_track(dataset, cfg, out_root)
    logger.info("tracked %d videos", len(tracks_by_video))
    spa_model = stage_spa_fit(dataset, cfg, out_root)
    logger.info("static scorer selected prompt '%s'", spa_model.prompt_id)
    result = stage_s3m_train(dataset, tracks_by_video, cfg, out_root)
    logger.info("temporal model trained, final epoch loss %.6g", result.epoch_losses[-1])
    stage_score(dataset, tracks_by_video, spa_model, result.params, cfg, out_root)
    logger.info("scored %d test videos", len(dataset.test))
    return stage_eval(dataset, out_root)
