/**
 * Serializers for the consumer pipeline's on-disk dataset layout:
 *
 *   <root>/prompt_pool.json
 *   <root>/train/<video_id>/manifest.json
 *   <root>/train/<video_id>/detections.jsonl   (frame-major, one per line)
 *   <root>/train/<video_id>/features.bin       (float32 little-endian rows)
 *   <root>/train/<video_id>/features.idx.json
 *
 * Exported videos carry no frame labels, so they land in the train split.
 * Output bytes depend only on the inputs: keys are written in fixed order
 * and numbers use JavaScript's shortest round-trip formatting.
 */

import { Box } from "./geometry.js";

export interface Prompt {
  prompt_id: string;
  text: string;
}

export interface ExportedDetection {
  frame: number;
  box: Box;
  confidence: number;
  featureRef: number;
  answers: Map<string, string>;
}

export interface ExportedVideo {
  videoId: string;
  frameCount: number;
  imageWidth: number;
  imageHeight: number;
  detections: ExportedDetection[];
  /** One row per detection, each `featureDim` long. */
  features: Float64Array[];
  featureDim: number;
  /** Extra manifest fields, e.g. how features were projected. */
  manifestExtra: Record<string, unknown>;
}

export function promptPoolJson(prompts: Prompt[]): Buffer {
  const entries = prompts.map((p) => ({ prompt_id: p.prompt_id, text: p.text }));
  return Buffer.from(JSON.stringify({ prompts: entries }, null, 1) + "\n");
}

export function manifestJson(video: ExportedVideo): Buffer {
  const head: Record<string, unknown> = {
    video_id: video.videoId,
    frame_count: video.frameCount,
    image_width: video.imageWidth,
    image_height: video.imageHeight,
    detection_count: video.detections.length,
    ...video.manifestExtra,
  };
  return Buffer.from(JSON.stringify(head, null, 1) + "\n");
}

export function detectionsJsonl(video: ExportedVideo): Buffer {
  const lines = video.detections.map((det) =>
    JSON.stringify({
      frame: det.frame,
      bbox: [det.box.x1, det.box.y1, det.box.x2, det.box.y2],
      confidence: det.confidence,
      feature_ref: det.featureRef,
      answers: Object.fromEntries(det.answers),
    }),
  );
  return Buffer.from(lines.map((l) => l + "\n").join(""));
}

export function featuresBin(video: ExportedVideo): Buffer {
  const rows = video.features.length;
  const dim = video.featureDim;
  const out = Buffer.alloc(rows * dim * 4);
  for (let r = 0; r < rows; r++) {
    const row = video.features[r]!;
    if (row.length !== dim) {
      throw new Error(`feature row ${r} has ${row.length} values, expected ${dim}`);
    }
    for (let c = 0; c < dim; c++) {
      const value = row[c]!;
      if (!Number.isFinite(value)) {
        throw new Error(`non-finite feature value at row ${r}, column ${c}`);
      }
      out.writeFloatLE(value, (r * dim + c) * 4);
    }
  }
  return out;
}

export function featuresIndexJson(video: ExportedVideo): Buffer {
  return Buffer.from(
    JSON.stringify({ dim: video.featureDim, rows: video.features.length }, null, 1) + "\n",
  );
}

/** All files for one video, keyed by path relative to the dataset root. */
export function videoFiles(video: ExportedVideo): Map<string, Buffer> {
  const base = `train/${video.videoId}`;
  return new Map([
    [`${base}/manifest.json`, manifestJson(video)],
    [`${base}/detections.jsonl`, detectionsJsonl(video)],
    [`${base}/features.bin`, featuresBin(video)],
    [`${base}/features.idx.json`, featuresIndexJson(video)],
  ]);
}
