"""Small shared helpers: canonical JSON, labeled sub-seeds, float formatting."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and fixed spacing so re-saves are byte-identical."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def canonical_jsonl_line(obj: Any) -> str:
    """One compact, key-sorted JSON document per line."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


def subseed(seed: int, label: str) -> int:
    """Derive a stable child seed from a top-level seed and a purpose label.

    Hash-based so adding a new labeled consumer never shifts the streams of
    existing ones. Stable across processes and platforms (unlike hash()).
    """
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(subseed(seed, label))


def format_float(value: float) -> str:
    """Shortest round-trip decimal form; deterministic for a given double."""
    return repr(float(value))
