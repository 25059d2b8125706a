/**
 * Deterministic randomness for the export pipeline.
 *
 * A single job seed fans out to labeled sub-seeds through SHA-256, and each
 * sub-seed drives a splitmix32 stream. Only integer mixing and IEEE division
 * are involved, so sequences are identical across platforms and runs.
 */

import { createHash } from "node:crypto";

/** Derive a 32-bit sub-seed for one labeled purpose. */
export function subSeed(seed: number, label: string): number {
  const digest = createHash("sha256").update(`${seed}:${label}`).digest();
  return digest.readUInt32BE(0);
}

export type Rng = () => number;

/** splitmix32: uniform floats in [0, 1), fully determined by the seed. */
export function makeRng(seed: number): Rng {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x9e3779b9) >>> 0;
    let t = state ^ (state >>> 16);
    t = Math.imul(t, 0x21f0aaad);
    t = (t ^ (t >>> 15)) >>> 0;
    t = Math.imul(t, 0x735a2d97);
    t = (t ^ (t >>> 15)) >>> 0;
    return t / 4294967296;
  };
}

/**
 * Dense Rademacher projection matrix: entries +-1/sqrt(inputDim), row-major
 * [outputDim x inputDim]. Sign choices avoid transcendental functions so the
 * matrix is bit-stable everywhere.
 */
export function projectionMatrix(seed: number, outputDim: number, inputDim: number): Float64Array {
  if (outputDim < 1 || inputDim < 1) {
    throw new Error(`projection needs positive dims, got ${outputDim}x${inputDim}`);
  }
  const rng = makeRng(seed);
  const scale = 1 / Math.sqrt(inputDim);
  const matrix = new Float64Array(outputDim * inputDim);
  for (let i = 0; i < matrix.length; i++) {
    matrix[i] = rng() < 0.5 ? -scale : scale;
  }
  return matrix;
}
