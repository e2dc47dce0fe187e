import { existsSync, readFileSync } from "fs";
import { join } from "path";

import { CaptionRecord, DatasetFormatError } from "./types.js";

/**
 * Read and validate a JSON-lines captions file. Records are returned sorted
 * by caption id so the export order (and therefore the output bytes) does not
 * depend on the order of lines in the file.
 */
export function readCaptions(datasetDir: string, captionsFile: string): CaptionRecord[] {
  if (!existsSync(captionsFile)) {
    throw new DatasetFormatError(`captions file not found: ${captionsFile}`);
  }
  const records: CaptionRecord[] = [];
  const seenIds = new Set<number>();
  const lines = readFileSync(captionsFile, "utf-8").split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let parsed: unknown;
    try {
      parsed = JSON.parse(line);
    } catch {
      throw new DatasetFormatError(`${captionsFile}:${i + 1}: invalid JSON`);
    }
    const rec = parsed as Partial<CaptionRecord>;
    if (typeof rec.image !== "string" || typeof rec.caption !== "string" || !Number.isInteger(rec.id)) {
      throw new DatasetFormatError(
        `${captionsFile}:${i + 1}: expected {image: string, caption: string, id: int}`,
      );
    }
    const id = rec.id as number;
    if (seenIds.has(id)) {
      throw new DatasetFormatError(`${captionsFile}:${i + 1}: duplicate caption id ${id}`);
    }
    seenIds.add(id);
    const imagePath = join(datasetDir, rec.image);
    if (!existsSync(imagePath)) {
      throw new DatasetFormatError(`${captionsFile}:${i + 1}: image file not found: ${imagePath}`);
    }
    records.push({ image: rec.image, caption: rec.caption, id });
  }
  if (records.length === 0) {
    throw new DatasetFormatError(`${captionsFile}: no caption records`);
  }
  records.sort((a, b) => a.id - b.id);
  return records;
}
