export interface ExportJob {
  /** Directory containing the image files referenced by the captions file. */
  datasetDir: string;
  /** JSON-lines captions file: one {image, caption, id} object per line. */
  captionsFile: string;
  /** Encoder identifier, e.g. "toy:16" or "xenova:Xenova/clip-vit-base-patch16". */
  encoder: string;
  batchSize: number;
  /** Recorded in the manifest note; only meaningful for model-backed encoders. */
  device: string;
  outputDir: string;
  /** Keep at most this many pairs (after sorting by caption id). */
  maxPairs?: number;
  /** L2-normalize every embedding row. */
  normalize: boolean;
}

/** One caption record; multiple records may reference the same image. */
export interface CaptionRecord {
  image: string;
  caption: string;
  id: number;
}

/** The corpus manifest consumed by the primary artifact (exact field set). */
export interface CorpusManifest {
  format_version: 1;
  dtype: "f32le";
  text_dim: number;
  image_dim: number;
  pair_count: number;
  encoder_name: string;
  normalized: boolean;
  source_note: string;
  text_file: string;
  image_file: string;
}

export class DatasetFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "DatasetFormatError";
  }
}

export class EncoderLoadError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "EncoderLoadError";
  }
}
