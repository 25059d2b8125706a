/**
 * Box utilities matching the consumer pipeline's semantics exactly:
 * IoU, strictly-greater-than overlap merging to a fixpoint, and short-side
 * squarification with border clamping.
 */

export interface Box {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export function box(x1: number, y1: number, x2: number, y2: number): Box {
  for (const v of [x1, y1, x2, y2]) {
    if (!Number.isFinite(v)) throw new Error(`non-finite box coordinate: ${x1},${y1},${x2},${y2}`);
  }
  if (!(x1 < x2 && y1 < y2)) {
    throw new Error(`degenerate box (need x1 < x2 and y1 < y2): ${x1},${y1},${x2},${y2}`);
  }
  return { x1, y1, x2, y2 };
}

export function area(b: Box): number {
  return (b.x2 - b.x1) * (b.y2 - b.y1);
}

export function iou(a: Box, b: Box): number {
  const ix = Math.min(a.x2, b.x2) - Math.max(a.x1, b.x1);
  const iy = Math.min(a.y2, b.y2) - Math.max(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0;
  const inter = ix * iy;
  return inter / (area(a) + area(b) - inter);
}

export function unionBox(a: Box, b: Box): Box {
  return box(
    Math.min(a.x1, b.x1),
    Math.min(a.y1, b.y1),
    Math.max(a.x2, b.x2),
    Math.max(a.y2, b.y2),
  );
}

function compareBoxes(a: Box, b: Box): number {
  return a.x1 - b.x1 || a.y1 - b.y1 || a.x2 - b.x2 || a.y2 - b.y2;
}

/**
 * Merge boxes whose IoU strictly exceeds tauMerge, repeating until every
 * remaining pair is at or below the threshold. Pairs are scanned in sorted
 * order and the output is sorted by (x1, y1, x2, y2), so the result is
 * deterministic and the operation is idempotent.
 */
export function mergeOverlapping(boxes: Box[], tauMerge = 0): Box[] {
  if (!(tauMerge >= 0 && tauMerge < 1)) {
    throw new Error(`tauMerge must be in [0, 1), got ${tauMerge}`);
  }
  const current = [...boxes].sort(compareBoxes);
  let merged = true;
  while (merged) {
    merged = false;
    outer: for (let i = 0; i < current.length; i++) {
      for (let j = i + 1; j < current.length; j++) {
        if (iou(current[i]!, current[j]!) > tauMerge) {
          const fused = unionBox(current[i]!, current[j]!);
          current.splice(j, 1);
          current.splice(i, 1);
          current.push(fused);
          current.sort(compareBoxes);
          merged = true;
          break outer;
        }
      }
    }
  }
  return current;
}

export function clampBox(b: Box, imageWidth: number, imageHeight: number): Box {
  return box(
    Math.max(0, Math.min(b.x1, imageWidth)),
    Math.max(0, Math.min(b.y1, imageHeight)),
    Math.max(0, Math.min(b.x2, imageWidth)),
    Math.max(0, Math.min(b.y2, imageHeight)),
  );
}

/**
 * Expand the short side symmetrically to match the long side, then clamp to
 * the image. Always contains the input box; square unless a border cut it.
 */
export function squarify(b: Box, imageWidth: number, imageHeight: number): Box {
  const w = b.x2 - b.x1;
  const h = b.y2 - b.y1;
  let expanded: Box;
  if (w < h) {
    const grow = (h - w) / 2;
    expanded = box(b.x1 - grow, b.y1, b.x2 + grow, b.y2);
  } else if (h < w) {
    const grow = (w - h) / 2;
    expanded = box(b.x1, b.y1 - grow, b.x2, b.y2 + grow);
  } else {
    return b;
  }
  return clampBox(expanded, imageWidth, imageHeight);
}
