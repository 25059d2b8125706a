/**
 * Pluggable per-clip models and the shipped classical backend.
 *
 * The backend contract is deliberately small: given the decoded grayscale
 * frames of one clip, produce per-frame object boxes with confidences,
 * answer the prompt pool per detection, and embed a crop as a fixed-length
 * feature vector. The default implementation is fully deterministic and
 * needs no model weights: median-background subtraction for detection,
 * motion/shape statistics for prompt answers, and a seeded random projection
 * of a bilinear-resampled patch for features.
 */

import { Box, box, mergeOverlapping } from "./geometry.js";
import { Image } from "./png.js";
import { projectionMatrix } from "./rng.js";

export interface RawDetection {
  box: Box;
  confidence: number;
  /** Fraction of the box area covered by foreground pixels. */
  density: number;
}

export interface Detector {
  /** Boxes per frame, same length as `frames`. */
  detect(frames: Image[]): RawDetection[][];
}

export interface Captioner {
  /** Prompt ids this model can answer. */
  readonly answerablePrompts: readonly string[];
  /**
   * One lowercased, trimmed answer token per requested prompt for every
   * detection; detections arrive frame by frame in emission order.
   */
  answer(detections: RawDetection[][], promptIds: string[]): Map<string, string>[][];
}

export interface Embedder {
  readonly dim: number;
  embed(frame: Image, cropRegion: Box): Float64Array;
  /** Description of the embedding recorded in the exported manifest. */
  describe(): Record<string, unknown>;
}

export interface Backend {
  detector: Detector;
  captioner: Captioner;
  embedder: Embedder;
}

export interface ClassicalOptions {
  /** Minimum |pixel - background| to count as foreground. */
  threshold?: number;
  /** Connected components smaller than this many pixels are noise. */
  minArea?: number;
  /** Boxes with IoU strictly above this are merged into their union. */
  tauMerge?: number;
  /** Centroid displacement (pixels/frame) separating "moving" from "still". */
  motionThreshold?: number;
  /** Side length of the resampled square patch fed to the projection. */
  patchSize?: number;
}

const DEFAULTS: Required<ClassicalOptions> = {
  threshold: 25,
  minArea: 12,
  tauMerge: 0,
  motionThreshold: 1.5,
  patchSize: 16,
};

/** Lower median over the clip, per pixel; robust to objects passing through. */
export function medianBackground(frames: Image[]): Uint8Array {
  const n = frames.length;
  const size = frames[0]!.width * frames[0]!.height;
  const background = new Uint8Array(size);
  const column = new Uint8Array(n);
  for (let i = 0; i < size; i++) {
    for (let t = 0; t < n; t++) column[t] = frames[t]!.data[i]!;
    column.sort();
    background[i] = column[(n - 1) >> 1]!;
  }
  return background;
}

interface Component {
  pixels: number;
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
  sumX: number;
  sumY: number;
}

function connectedComponents(mask: Uint8Array, width: number, height: number): Component[] {
  const labels = new Int32Array(width * height).fill(-1);
  const queue = new Int32Array(width * height);
  const components: Component[] = [];
  for (let start = 0; start < mask.length; start++) {
    if (mask[start] === 0 || labels[start] !== -1) continue;
    const label = components.length;
    const comp: Component = {
      pixels: 0,
      minX: width,
      minY: height,
      maxX: -1,
      maxY: -1,
      sumX: 0,
      sumY: 0,
    };
    let head = 0;
    let tail = 0;
    queue[tail++] = start;
    labels[start] = label;
    while (head < tail) {
      const idx = queue[head++]!;
      const x = idx % width;
      const y = (idx - x) / width;
      comp.pixels++;
      comp.sumX += x;
      comp.sumY += y;
      if (x < comp.minX) comp.minX = x;
      if (x > comp.maxX) comp.maxX = x;
      if (y < comp.minY) comp.minY = y;
      if (y > comp.maxY) comp.maxY = y;
      // 4-connectivity
      if (x > 0 && mask[idx - 1] !== 0 && labels[idx - 1] === -1) {
        labels[idx - 1] = label;
        queue[tail++] = idx - 1;
      }
      if (x + 1 < width && mask[idx + 1] !== 0 && labels[idx + 1] === -1) {
        labels[idx + 1] = label;
        queue[tail++] = idx + 1;
      }
      if (y > 0 && mask[idx - width] !== 0 && labels[idx - width] === -1) {
        labels[idx - width] = label;
        queue[tail++] = idx - width;
      }
      if (y + 1 < height && mask[idx + width] !== 0 && labels[idx + width] === -1) {
        labels[idx + width] = label;
        queue[tail++] = idx + width;
      }
    }
    components.push(comp);
  }
  return components;
}

/** Foreground fraction of an integer-aligned box region. */
function maskDensity(mask: Uint8Array, width: number, b: Box): number {
  let covered = 0;
  for (let y = b.y1; y < b.y2; y++) {
    for (let x = b.x1; x < b.x2; x++) {
      covered += mask[y * width + x]!;
    }
  }
  return covered / ((b.x2 - b.x1) * (b.y2 - b.y1));
}

export class MedianBackgroundDetector implements Detector {
  constructor(private readonly options: Required<ClassicalOptions>) {}

  detect(frames: Image[]): RawDetection[][] {
    const { width, height } = frames[0]!;
    const background = medianBackground(frames);
    const mask = new Uint8Array(width * height);
    const { threshold, minArea, tauMerge } = this.options;

    return frames.map((frame) => {
      for (let i = 0; i < mask.length; i++) {
        mask[i] = Math.abs(frame.data[i]! - background[i]!) >= threshold ? 1 : 0;
      }
      const candidates: Box[] = [];
      for (const comp of connectedComponents(mask, width, height)) {
        if (comp.pixels < minArea) continue;
        candidates.push(box(comp.minX, comp.minY, comp.maxX + 1, comp.maxY + 1));
      }
      // components never share pixels but their boxes can still overlap
      return mergeOverlapping(candidates, tauMerge).map((b) => {
        const density = maskDensity(mask, width, b);
        return { box: b, confidence: Math.min(0.99, 0.4 + 0.6 * density), density };
      });
    });
  }
}

function centroid(b: Box): [number, number] {
  return [(b.x1 + b.x2) / 2, (b.y1 + b.y2) / 2];
}

export class MotionStatsCaptioner implements Captioner {
  readonly answerablePrompts = ["p_action", "p_extent"] as const;

  constructor(private readonly motionThreshold: number) {}

  answer(detections: RawDetection[][], promptIds: string[]): Map<string, string>[][] {
    for (const pid of promptIds) {
      if (!this.answerablePrompts.includes(pid as "p_action" | "p_extent")) {
        throw new Error(`model cannot answer prompt '${pid}'`);
      }
    }
    return detections.map((frameDets, t) => {
      const previous = t > 0 ? detections[t - 1]! : [];
      return frameDets.map((det) => {
        const answers = new Map<string, string>();
        for (const pid of promptIds) {
          answers.set(pid, pid === "p_action" ? this.action(det, previous) : this.extent(det));
        }
        return answers;
      });
    });
  }

  private action(det: RawDetection, previous: RawDetection[]): string {
    // nearest previous-frame centroid; a new object has no motion evidence
    const [cx, cy] = centroid(det.box);
    let best = Infinity;
    for (const p of previous) {
      const [px, py] = centroid(p.box);
      const d = Math.sqrt((cx - px) * (cx - px) + (cy - py) * (cy - py));
      if (d < best) best = d;
    }
    if (!Number.isFinite(best)) return "still";
    return best > this.motionThreshold ? "moving" : "still";
  }

  private extent(det: RawDetection): string {
    const w = det.box.x2 - det.box.x1;
    const h = det.box.y2 - det.box.y1;
    const aspect = w / h;
    if (aspect > 1.25) return "wide";
    if (aspect < 0.8) return "tall";
    return "square";
  }
}

/** Bilinear resample of one grayscale crop to a patchSize x patchSize grid. */
export function resampleCrop(frame: Image, region: Box, patchSize: number): Float64Array {
  const x0 = Math.max(0, Math.floor(region.x1));
  const y0 = Math.max(0, Math.floor(region.y1));
  const x1 = Math.min(frame.width, Math.ceil(region.x2));
  const y1 = Math.min(frame.height, Math.ceil(region.y2));
  const cw = Math.max(1, x1 - x0);
  const ch = Math.max(1, y1 - y0);

  const out = new Float64Array(patchSize * patchSize);
  for (let py = 0; py < patchSize; py++) {
    const sy = ((py + 0.5) * ch) / patchSize - 0.5;
    const yLo = Math.min(ch - 1, Math.max(0, Math.floor(sy)));
    const yHi = Math.min(ch - 1, yLo + 1);
    const fy = Math.min(1, Math.max(0, sy - yLo));
    for (let px = 0; px < patchSize; px++) {
      const sx = ((px + 0.5) * cw) / patchSize - 0.5;
      const xLo = Math.min(cw - 1, Math.max(0, Math.floor(sx)));
      const xHi = Math.min(cw - 1, xLo + 1);
      const fx = Math.min(1, Math.max(0, sx - xLo));
      const at = (yy: number, xx: number) => frame.data[(y0 + yy) * frame.width + x0 + xx]!;
      const top = at(yLo, xLo) * (1 - fx) + at(yLo, xHi) * fx;
      const bottom = at(yHi, xLo) * (1 - fx) + at(yHi, xHi) * fx;
      out[py * patchSize + px] = (top * (1 - fy) + bottom * fy) / 255;
    }
  }
  return out;
}

export class ProjectionEmbedder implements Embedder {
  private readonly matrix: Float64Array;
  private readonly rawDim: number;

  constructor(
    readonly dim: number,
    private readonly seed: number,
    private readonly patchSize: number,
  ) {
    this.rawDim = patchSize * patchSize;
    this.matrix = projectionMatrix(seed, dim, this.rawDim);
  }

  embed(frame: Image, cropRegion: Box): Float64Array {
    const patch = resampleCrop(frame, cropRegion, this.patchSize);
    const out = new Float64Array(this.dim);
    for (let i = 0; i < this.dim; i++) {
      let acc = 0;
      const row = i * this.rawDim;
      for (let j = 0; j < this.rawDim; j++) {
        acc += this.matrix[row + j]! * patch[j]!;
      }
      out[i] = acc;
    }
    return out;
  }

  describe(): Record<string, unknown> {
    return {
      method: "rademacher-projection",
      seed: this.seed,
      raw_dim: this.rawDim,
      dim: this.dim,
      patch_size: this.patchSize,
    };
  }
}

export function classicalBackend(
  featureDim: number,
  projectionSeed: number,
  options: ClassicalOptions = {},
): Backend {
  const resolved = { ...DEFAULTS, ...options };
  return {
    detector: new MedianBackgroundDetector(resolved),
    captioner: new MotionStatsCaptioner(resolved.motionThreshold),
    embedder: new ProjectionEmbedder(featureDim, projectionSeed, resolved.patchSize),
  };
}
