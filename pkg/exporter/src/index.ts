export { runExport, loadPromptPool, DEFAULT_PROMPTS } from "./export.js";
export type { ExportJob, ExportResult } from "./export.js";
export type { Prompt } from "./dataset.js";
export { classicalBackend } from "./backend.js";
export type { Backend, Detector, Captioner, Embedder, ClassicalOptions } from "./backend.js";
export { encodePng, decodePng, toGrayscale } from "./png.js";
export type { Image } from "./png.js";
export { box, iou, mergeOverlapping, squarify, clampBox, unionBox } from "./geometry.js";
export type { Box } from "./geometry.js";
export { makeRng, subSeed, projectionMatrix } from "./rng.js";
