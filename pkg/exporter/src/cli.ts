#!/usr/bin/env node
/**
 * Command line entry point:
 *
 *   vadkit-exporter export --video <dir> [--video <dir> ...] --out <root>
 *                          [--dim N] [--seed N] [--prompts pool.json]
 *                          [--threshold N] [--min-area N] [--tau X]
 *
 * Errors print `error: ...` to stderr and exit 1, matching the consumer
 * pipeline's CLI conventions.
 */

import { parseArgs } from "node:util";

import { DEFAULT_PROMPTS, loadPromptPool, runExport } from "./export.js";

const USAGE =
  "usage: vadkit-exporter export --video <dir> [--video <dir> ...] --out <root>\n" +
  "                              [--dim N] [--seed N] [--prompts pool.json]\n" +
  "                              [--threshold N] [--min-area N] [--tau X]";

function intOption(value: string | undefined, name: string, fallback: number): number {
  if (value === undefined) return fallback;
  const parsed = Number(value);
  if (!Number.isInteger(parsed)) throw new Error(`--${name} expects an integer, got '${value}'`);
  return parsed;
}

function floatOption(value: string | undefined, name: string, fallback: number): number {
  if (value === undefined) return fallback;
  const parsed = Number(value);
  if (!Number.isFinite(parsed)) throw new Error(`--${name} expects a number, got '${value}'`);
  return parsed;
}

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        video: { type: "string", multiple: true },
        out: { type: "string" },
        dim: { type: "string" },
        seed: { type: "string" },
        prompts: { type: "string" },
        threshold: { type: "string" },
        "min-area": { type: "string" },
        tau: { type: "string" },
        help: { type: "boolean" },
      },
    });
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n${USAGE}\n`);
    return 2;
  }

  if (parsed.values.help) {
    process.stdout.write(USAGE + "\n");
    return 0;
  }
  const command = parsed.positionals[0];
  if (command !== "export") {
    process.stderr.write(`error: unknown command '${command ?? ""}'\n${USAGE}\n`);
    return 2;
  }

  try {
    const videos = parsed.values.video ?? [];
    const out = parsed.values.out;
    if (videos.length === 0) throw new Error("at least one --video directory is required");
    if (!out) throw new Error("--out is required");

    const result = runExport({
      videoDirs: videos,
      outDir: out,
      featureDim: intOption(parsed.values.dim, "dim", 32),
      seed: intOption(parsed.values.seed, "seed", 7),
      prompts: parsed.values.prompts ? loadPromptPool(parsed.values.prompts) : DEFAULT_PROMPTS,
      backendOptions: {
        threshold: intOption(parsed.values.threshold, "threshold", 25),
        minArea: intOption(parsed.values["min-area"], "min-area", 12),
        tauMerge: floatOption(parsed.values.tau, "tau", 0),
      },
    });
    for (const video of result.videos) {
      process.stdout.write(
        `exported ${video.videoId}: ${video.frames} frames, ${video.detections} detections\n`,
      );
    }
    process.stdout.write(`wrote dataset to ${result.outDir}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

// invoked directly, not imported
if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
