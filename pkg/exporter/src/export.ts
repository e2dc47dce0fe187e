import { mkdirSync, writeFileSync } from "fs";
import { join } from "path";

import { readCaptions } from "./dataset.js";
import { Encoder, getEncoder } from "./encoders.js";
import { CorpusManifest, DatasetFormatError, ExportJob } from "./types.js";

function l2normalize(vec: Float64Array): Float64Array {
  let sq = 0;
  for (const v of vec) sq += v * v;
  if (sq === 0) {
    const out = vec.slice();
    out[0] = 1.0;
    return out;
  }
  const inv = 1.0 / Math.sqrt(sq);
  const out = new Float64Array(vec.length);
  for (let j = 0; j < vec.length; j++) out[j] = vec[j] * inv;
  return out;
}

/** Row-major little-endian float32, no header: the primary's matrix format. */
export function writeF32Matrix(path: string, rows: Float64Array[]): void {
  const dim = rows[0].length;
  const buf = Buffer.allocUnsafe(4 * rows.length * dim);
  let offset = 0;
  for (const row of rows) {
    if (row.length !== dim) {
      throw new DatasetFormatError(`ragged embedding rows: ${row.length} vs ${dim}`);
    }
    for (let j = 0; j < dim; j++) {
      buf.writeFloatLE(row[j], offset);
      offset += 4;
    }
  }
  writeFileSync(path, buf);
}

async function mapInBatches<T>(
  items: T[],
  batchSize: number,
  fn: (chunk: T[]) => Promise<Float64Array[]>,
): Promise<Float64Array[]> {
  const out: Float64Array[] = [];
  for (let i = 0; i < items.length; i += batchSize) {
    const chunk = items.slice(i, i + batchSize);
    out.push(...(await fn(chunk)));
  }
  return out;
}

/**
 * Export paired embeddings: one text row per caption, one image row per
 * paired image (an image referenced by several captions is embedded once and
 * its row duplicated, keeping row i of both matrices about the same pair).
 * Output order is the caption-id order from readCaptions, so re-exporting a
 * shuffled captions file reproduces identical bytes.
 */
export async function exportEmbeddings(job: ExportJob): Promise<CorpusManifest> {
  let records = readCaptions(job.datasetDir, job.captionsFile);
  if (job.maxPairs !== undefined && records.length > job.maxPairs) {
    records = records.slice(0, job.maxPairs);
  }
  if (records.length < 2) {
    throw new DatasetFormatError(
      `need at least 2 caption records for a corpus, got ${records.length}`,
    );
  }
  const encoder: Encoder = await getEncoder(job.encoder, job.device);

  const textRows = await mapInBatches(records, job.batchSize, (chunk) =>
    encoder.embedTexts(chunk.map((r) => r.caption)),
  );

  const uniquePaths = [...new Set(records.map((r) => r.image))];
  const uniqueRows = await mapInBatches(uniquePaths, job.batchSize, (chunk) =>
    encoder.embedImages(chunk.map((p) => join(job.datasetDir, p))),
  );
  const imageByPath = new Map(uniquePaths.map((p, i) => [p, uniqueRows[i]]));
  const imageRows = records.map((r) => imageByPath.get(r.image)!);

  const finalText = job.normalize ? textRows.map(l2normalize) : textRows;
  const finalImage = job.normalize ? imageRows.map(l2normalize) : imageRows;

  const manifest: CorpusManifest = {
    format_version: 1,
    dtype: "f32le",
    text_dim: encoder.textDim,
    image_dim: encoder.imageDim,
    pair_count: records.length,
    encoder_name: encoder.name,
    normalized: job.normalize,
    source_note: `exported from ${job.datasetDir} (captions sorted by id, device=${job.device})`,
    text_file: "text_embeddings.bin",
    image_file: "image_embeddings.bin",
  };

  mkdirSync(job.outputDir, { recursive: true });
  writeF32Matrix(join(job.outputDir, manifest.text_file), finalText);
  writeF32Matrix(join(job.outputDir, manifest.image_file), finalImage);
  const keys = Object.keys(manifest).sort() as (keyof CorpusManifest)[];
  const sorted: Record<string, unknown> = {};
  for (const k of keys) sorted[k] = manifest[k];
  writeFileSync(join(job.outputDir, "manifest.json"), JSON.stringify(sorted, null, 2) + "\n");
  return manifest;
}
