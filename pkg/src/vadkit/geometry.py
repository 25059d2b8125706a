"""Axis-aligned box utilities: IoU, overlap merging, short-side squarification.

Boxes are (x1, y1, x2, y2) in image pixel space with x1 < x2 and y1 < y2.
All operations are pure; nothing here touches pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError(f"non-finite box coordinate: {self}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box (need x1 < x2 and y1 < y2): {self}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 for disjoint boxes, 1 only for identical ones."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def union_box(a: BBox, b: BBox) -> BBox:
    """Tight axis-aligned bounding box of two boxes."""
    return BBox(min(a.x1, b.x1), min(a.y1, b.y1), max(a.x2, b.x2), max(a.y2, b.y2))


def merge_overlapping(boxes: list[BBox], tau_merge: float = 0.0) -> list[BBox]:
    """Merge boxes whose IoU strictly exceeds tau_merge, to fixpoint.

    Any overlapping pair is replaced by its tight union; repeated until no
    pair overlaps above the threshold, so the result is pairwise
    IoU <= tau_merge and the operation is idempotent. Candidate pairs are
    scanned in a fixed sorted order and the output is sorted by
    (x1, y1, x2, y2), which makes the result deterministic.
    """
    if not (0.0 <= tau_merge < 1.0):
        raise ValueError(f"tau_merge must be in [0, 1), got {tau_merge}")
    current = sorted(boxes, key=BBox.as_tuple)
    merged = True
    while merged:
        merged = False
        for i in range(len(current)):
            for j in range(i + 1, len(current)):
                if iou(current[i], current[j]) > tau_merge:
                    fused = union_box(current[i], current[j])
                    del current[j]
                    del current[i]
                    current.append(fused)
                    current.sort(key=BBox.as_tuple)
                    merged = True
                    break
            if merged:
                break
    return current


def clamp_box(box: BBox, image_width: float, image_height: float) -> BBox:
    """Clip a box to image bounds."""
    return BBox(
        max(0.0, min(box.x1, image_width)),
        max(0.0, min(box.y1, image_height)),
        max(0.0, min(box.x2, image_width)),
        max(0.0, min(box.y2, image_height)),
    )


def squarify(box: BBox, image_width: float, image_height: float) -> BBox:
    """Expand the short side symmetrically to match the long side, then clamp.

    The result is square unless clamping at an image border cuts it; it always
    contains the input box. The downstream 224x224 resize is metadata only, so
    no resampling happens here.
    """
    w, h = box.width, box.height
    if w < h:
        grow = (h - w) / 2.0
        expanded = BBox(box.x1 - grow, box.y1, box.x2 + grow, box.y2)
    elif h < w:
        grow = (w - h) / 2.0
        expanded = BBox(box.x1, box.y1 - grow, box.x2, box.y2 + grow)
    else:
        return box
    return clamp_box(expanded, image_width, image_height)
