#!/usr/bin/env node
import { join } from "path";

import { exportEmbeddings } from "./export.js";
import { DatasetFormatError, EncoderLoadError, ExportJob } from "./types.js";

function usage(): never {
  console.error(
    [
      "usage: embedding-exporter --dataset DIR --out DIR [options]",
      "",
      "  --dataset DIR      directory with image files (+ captions.jsonl by default)",
      "  --captions FILE    JSON-lines captions file {image, caption, id} (default: DIR/captions.jsonl)",
      "  --encoder ID       toy[:dim] | xenova:<modelId>   (default: toy:16)",
      "  --batch-size N     embedding batch size            (default: 32)",
      "  --device NAME      device hint for model encoders  (default: cpu)",
      "  --max-pairs N      keep at most N pairs",
      "  --normalize        L2-normalize every row",
      "  --out DIR          output directory for the corpus",
    ].join("\n"),
  );
  process.exit(2);
}

function parseArgs(argv: string[]): ExportJob {
  const flags = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) usage();
    if (arg === "--normalize") {
      flags.set("normalize", true);
    } else {
      const value = argv[++i];
      if (value === undefined) usage();
      flags.set(arg.slice(2), value);
    }
  }
  const dataset = flags.get("dataset");
  const out = flags.get("out");
  if (typeof dataset !== "string" || typeof out !== "string") usage();
  return {
    datasetDir: dataset,
    captionsFile: (flags.get("captions") as string) ?? join(dataset, "captions.jsonl"),
    encoder: (flags.get("encoder") as string) ?? "toy:16",
    batchSize: Number(flags.get("batch-size") ?? 32),
    device: (flags.get("device") as string) ?? "cpu",
    outputDir: out,
    maxPairs: flags.has("max-pairs") ? Number(flags.get("max-pairs")) : undefined,
    normalize: flags.get("normalize") === true,
  };
}

async function main(): Promise<void> {
  const job = parseArgs(process.argv.slice(2));
  try {
    const manifest = await exportEmbeddings(job);
    console.log(
      `exported ${manifest.pair_count} pairs ` +
        `(text ${manifest.text_dim}d, image ${manifest.image_dim}d, ` +
        `encoder ${manifest.encoder_name}) to ${job.outputDir}`,
    );
  } catch (err) {
    if (err instanceof DatasetFormatError || err instanceof EncoderLoadError) {
      console.error(`error: ${err.name}: ${err.message}`);
      process.exit(2);
    }
    throw err;
  }
}

main();
