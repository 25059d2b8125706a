/**
 * The export job: decode frame sequences, run the backend models, and write
 * a dataset the consumer pipeline validates and tracks as-is.
 *
 * A "video" is a directory of PNG frames ordered by filename. All outputs
 * are assembled in memory and flushed only after every video has processed
 * cleanly, so a failing input never leaves partial output behind.
 */

import { mkdirSync, readdirSync, readFileSync, statSync, writeFileSync } from "node:fs";
import { dirname, join, basename } from "node:path";

import { Backend, classicalBackend, ClassicalOptions } from "./backend.js";
import { squarify } from "./geometry.js";
import {
  ExportedDetection,
  ExportedVideo,
  Prompt,
  promptPoolJson,
  videoFiles,
} from "./dataset.js";
import { decodePng, Image, toGrayscale } from "./png.js";
import { subSeed } from "./rng.js";

export const DEFAULT_PROMPTS: Prompt[] = [
  { prompt_id: "p_action", text: "what is this object doing" },
  { prompt_id: "p_extent", text: "what shape does this object have" },
];

export interface ExportJob {
  /** One directory of PNG frames per video. */
  videoDirs: string[];
  /** Dataset root to create; must not already contain files. */
  outDir: string;
  /** Target feature dimension D. */
  featureDim: number;
  /** Job seed; the feature projection derives its own labeled sub-seed. */
  seed: number;
  prompts: Prompt[];
  backendOptions?: ClassicalOptions;
  /** Replaces the classical backend when provided (e.g. in tests). */
  backend?: Backend;
}

export interface ExportResult {
  outDir: string;
  videos: { videoId: string; frames: number; detections: number }[];
}

function videoIdFrom(dir: string): string {
  const id = basename(dir).replace(/[^A-Za-z0-9_-]/g, "_");
  if (id.length === 0) throw new Error(`cannot derive a video id from '${dir}'`);
  return id;
}

function loadFrames(dir: string): Image[] {
  let names: string[];
  try {
    names = readdirSync(dir).filter((n) => n.toLowerCase().endsWith(".png"));
  } catch (err) {
    throw new Error(`cannot read video directory '${dir}': ${(err as Error).message}`);
  }
  names.sort();
  if (names.length === 0) {
    throw new Error(`video directory '${dir}' contains no PNG frames`);
  }
  return names.map((name) => {
    const path = join(dir, name);
    let image: Image;
    try {
      image = decodePng(readFileSync(path));
    } catch (err) {
      throw new Error(`undecodable frame '${path}': ${(err as Error).message}`);
    }
    return toGrayscale(image);
  });
}

function exportVideo(
  videoId: string,
  frames: Image[],
  backend: Backend,
  prompts: Prompt[],
  manifestExtra: Record<string, unknown>,
): ExportedVideo {
  const { width, height } = frames[0]!;
  for (const [t, frame] of frames.entries()) {
    if (frame.width !== width || frame.height !== height) {
      throw new Error(
        `video '${videoId}': frame ${t} is ${frame.width}x${frame.height}, expected ${width}x${height}`,
      );
    }
  }

  const perFrame = backend.detector.detect(frames);
  const promptIds = prompts.map((p) => p.prompt_id);
  const answers = backend.captioner.answer(perFrame, promptIds);

  const detections: ExportedDetection[] = [];
  const features: Float64Array[] = [];
  for (let t = 0; t < frames.length; t++) {
    for (const [i, det] of perFrame[t]!.entries()) {
      // squarified crop feeds the embedder; the emitted box stays tight
      const crop = squarify(det.box, width, height);
      features.push(backend.embedder.embed(frames[t]!, crop));
      detections.push({
        frame: t,
        box: det.box,
        confidence: det.confidence,
        featureRef: features.length - 1,
        answers: answers[t]![i]!,
      });
    }
  }

  return {
    videoId,
    frameCount: frames.length,
    imageWidth: width,
    imageHeight: height,
    detections,
    features,
    featureDim: backend.embedder.dim,
    manifestExtra,
  };
}

export function runExport(job: ExportJob): ExportResult {
  if (job.videoDirs.length === 0) throw new Error("no video directories given");
  if (!Number.isInteger(job.featureDim) || job.featureDim < 1) {
    throw new Error(`feature dimension must be a positive integer, got ${job.featureDim}`);
  }
  if (job.prompts.length === 0) throw new Error("prompt pool is empty");
  const promptIds = new Set(job.prompts.map((p) => p.prompt_id));
  if (promptIds.size !== job.prompts.length) throw new Error("duplicate prompt_id in pool");

  const projectionSeed = subSeed(job.seed, "feature-projection");
  const backend =
    job.backend ?? classicalBackend(job.featureDim, projectionSeed, job.backendOptions);

  // process everything before touching the filesystem
  const files = new Map<string, Buffer>([["prompt_pool.json", promptPoolJson(job.prompts)]]);
  const summaries: ExportResult["videos"] = [];
  const seenIds = new Set<string>();
  for (const dir of job.videoDirs) {
    const videoId = videoIdFrom(dir);
    if (seenIds.has(videoId)) throw new Error(`duplicate video id '${videoId}'`);
    seenIds.add(videoId);
    const frames = loadFrames(dir);
    const video = exportVideo(videoId, frames, backend, job.prompts, {
      feature_projection: backend.embedder.describe(),
    });
    for (const [path, data] of videoFiles(video)) files.set(path, data);
    summaries.push({
      videoId,
      frames: video.frameCount,
      detections: video.detections.length,
    });
  }

  if (statSafe(job.outDir)?.isFile()) {
    throw new Error(`output path '${job.outDir}' is a file`);
  }
  try {
    if (readdirSync(job.outDir).length > 0) {
      throw new Error(`refusing to write into non-empty directory '${job.outDir}'`);
    }
  } catch (err) {
    // a missing directory is fine: it is created on first write
    if ((err as NodeJS.ErrnoException).code !== "ENOENT") throw err;
  }

  for (const [relPath, data] of files) {
    const path = join(job.outDir, relPath);
    mkdirSync(dirname(path), { recursive: true });
    writeFileSync(path, data);
  }
  return { outDir: job.outDir, videos: summaries };
}

function statSafe(path: string) {
  try {
    return statSync(path);
  } catch {
    return undefined;
  }
}

export function loadPromptPool(path: string): Prompt[] {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new Error(`cannot read prompt pool '${path}': ${(err as Error).message}`);
  }
  const prompts = (raw as { prompts?: unknown }).prompts;
  if (!Array.isArray(prompts) || prompts.length === 0) {
    throw new Error(`prompt pool '${path}' must contain a non-empty "prompts" array`);
  }
  return prompts.map((entry, i) => {
    const p = entry as Partial<Prompt>;
    if (typeof p.prompt_id !== "string" || p.prompt_id.length === 0) {
      throw new Error(`prompt pool '${path}': entry ${i} needs a string prompt_id`);
    }
    return { prompt_id: p.prompt_id, text: typeof p.text === "string" ? p.text : "" };
  });
}
