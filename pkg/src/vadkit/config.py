"""Pipeline configuration: defaults, config files, and override precedence.

Precedence, lowest to highest: built-in defaults, then a config file, then
explicit overrides (command-line flags and --set key=value pairs). Config
files come in two interchangeable forms: a simple `key = value` text format
(# comments, one pair per line) and the JSON object the pipeline echoes to
effective_config.json, so a finished run's echo can be fed straight back in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from vadkit.errors import ConfigError
from vadkit.s3m import TrainConfig
from vadkit.tracking import TrackerConfig


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the end-to-end pipeline, flattened for file round-trips."""

    dataset_root: str = ""
    out_dir: str = ""
    seed: int = 7
    # tracker
    conf_high: float = 0.6
    conf_low: float = 0.1
    iou_min: float = 0.3
    # clip segmentation
    clip_len: int = 8
    clip_stride: int = 1
    # static scorer
    spa_alpha: float = 1.0
    spa_normalize: bool = True
    # temporal model
    state_dim: int = 64
    epochs: int = 20
    lr0: float = 5e-5
    lr_decay: float = 0.99
    init_std: float = 0.02
    init_mode: str = "gaussian"
    grad_clip_norm: float = 1.0
    optimizer: str = "adam"
    hippo_dt: float = 0.125
    # fusion and smoothing
    fusion_weight: float = 0.5
    smooth_sigma: float = 2.0
    # "global" puts every test video's components on one shared scale;
    # "video" rescales each video independently
    normalize_scope: str = "global"
    # scoring parallelism (across videos)
    jobs: int = 1

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(conf_high=self.conf_high, conf_low=self.conf_low, iou_min=self.iou_min)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            lr0=self.lr0,
            lr_decay=self.lr_decay,
            init_std=self.init_std,
            init_mode=self.init_mode,
            grad_clip_norm=self.grad_clip_norm,
            seed=self.seed,
            optimizer=self.optimizer,
            hippo_dt=self.hippo_dt,
        )

    def as_mapping(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def validate_pipeline_config(cfg: PipelineConfig) -> None:
    """Raise ConfigError on any out-of-range value."""
    if not (0.0 <= cfg.conf_low <= cfg.conf_high <= 1.0):
        raise ConfigError("need 0 <= conf_low <= conf_high <= 1")
    if not (0.0 <= cfg.iou_min < 1.0):
        raise ConfigError("iou_min must be in [0, 1)")
    if cfg.clip_len < 2:
        raise ConfigError("clip_len must be >= 2")
    if cfg.clip_stride < 1:
        raise ConfigError("clip_stride must be >= 1")
    if cfg.spa_alpha <= 0.0:
        raise ConfigError("spa_alpha must be positive")
    if cfg.state_dim < 1:
        raise ConfigError("state_dim must be >= 1")
    if not (0.0 <= cfg.fusion_weight <= 1.0):
        raise ConfigError("fusion_weight must be in [0, 1]")
    if cfg.smooth_sigma <= 0.0:
        raise ConfigError("smooth_sigma must be positive")
    if cfg.normalize_scope not in ("global", "video"):
        raise ConfigError("normalize_scope must be 'global' or 'video'")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg.grad_clip_norm <= 0.0:
        raise ConfigError("grad_clip_norm must be positive")
    if cfg.hippo_dt <= 0.0:
        raise ConfigError("hippo_dt must be positive")
    try:
        cfg.train_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, raw: Any) -> Any:
    """Coerce a raw file/flag value to the declared field type."""
    kind = _FIELD_TYPES[key]
    if kind == "bool":
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("true", "1", "yes"):
            return True
        if text in ("false", "0", "no"):
            return False
        raise ConfigError(f"config key '{key}': expected a boolean, got '{raw}'")
    if kind == "int":
        if isinstance(raw, bool):
            raise ConfigError(f"config key '{key}': expected an integer, got '{raw}'")
        try:
            return int(str(raw).strip())
        except ValueError as exc:
            raise ConfigError(f"config key '{key}': expected an integer, got '{raw}'") from exc
    if kind == "float":
        try:
            return float(str(raw).strip())
        except ValueError as exc:
            raise ConfigError(f"config key '{key}': expected a number, got '{raw}'") from exc
    return str(raw)


def parse_kv_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse `key = value` lines; # starts a comment, blank lines ignored."""
    mapping: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value', got '{stripped}'")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{line_no}: empty key")
        if key in mapping:
            raise ConfigError(f"{source}:{line_no}: duplicate key '{key}'")
        mapping[key] = value.strip()
    return mapping


def load_config_file(path: Path | str) -> dict[str, Any]:
    """Read a config file in either supported form into a raw mapping."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise ConfigError(f"{path}: malformed JSON config: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: JSON config must be an object")
        return data
    return parse_kv_text(text, source=str(path))


def parse_overrides(pairs: list[str]) -> dict[str, str]:
    """Parse --set style key=value strings."""
    mapping: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override '{pair}' must look like key=value")
        key, value = pair.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def build_config(
    file_mapping: dict[str, Any] | None = None,
    overrides: dict[str, Any] | None = None,
) -> PipelineConfig:
    """Merge defaults <- file <- overrides into a validated PipelineConfig."""
    merged: dict[str, Any] = {}
    for mapping in (file_mapping or {}, overrides or {}):
        for key, raw in mapping.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key '{key}'")
            merged[key] = _coerce(key, raw)
    cfg = PipelineConfig(**merged)
    validate_pipeline_config(cfg)
    return cfg
