import { readFileSync } from "fs";

import { EncoderLoadError } from "./types.js";

/** Maps caption strings and image files to embedding rows. */
export interface Encoder {
  name: string;
  textDim: number;
  imageDim: number;
  embedTexts(texts: string[]): Promise<Float64Array[]>;
  embedImages(paths: string[]): Promise<Float64Array[]>;
}

function fnv1a(bytes: Uint8Array): number {
  let h = 0x811c9dc5;
  for (const b of bytes) {
    h ^= b;
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

const utf8 = new TextEncoder();

/**
 * Deterministic model-free encoder for tests and plumbing checks: hashed
 * bag-of-tokens for text, folded byte histogram for images. Stable across
 * platforms (integer hashing plus fixed-order float accumulation).
 */
export function toyEncoder(dim: number): Encoder {
  if (!Number.isInteger(dim) || dim < 1) {
    throw new EncoderLoadError(`toy encoder dim must be a positive integer, got ${dim}`);
  }

  function embedText(text: string): Float64Array {
    const vec = new Float64Array(dim);
    const tokens = text.toLowerCase().split(/[^a-z0-9]+/).filter(Boolean);
    for (const token of tokens) {
      const h = fnv1a(utf8.encode(token));
      vec[h % dim] += 1.0;
      vec[(h >>> 16) % dim] += 0.5;
    }
    if (tokens.length === 0) vec[0] = 1.0;
    return vec;
  }

  function embedImage(path: string): Float64Array {
    const vec = new Float64Array(dim);
    const bytes = readFileSync(path);
    for (let i = 0; i < bytes.length; i++) {
      vec[(bytes[i] + (i % 13)) % dim] += 1.0;
    }
    const salt = fnv1a(bytes);
    vec[salt % dim] += 2.0;
    const scale = 1.0 / Math.sqrt(Math.max(bytes.length, 1));
    for (let j = 0; j < dim; j++) vec[j] *= scale;
    return vec;
  }

  return {
    name: `toy:${dim}`,
    textDim: dim,
    imageDim: dim,
    embedTexts: async (texts) => texts.map(embedText),
    embedImages: async (paths) => paths.map(embedImage),
  };
}

/**
 * CLIP-family encoder backed by @xenova/transformers (downloads model
 * weights on first use). The dependency is loaded lazily so the exporter
 * works without it installed.
 */
export async function transformersEncoder(modelId: string, device: string): Promise<Encoder> {
  let tf: any;
  try {
    const moduleId = "@xenova/transformers"; // optional dependency, resolved at runtime
    tf = await import(moduleId);
  } catch (err) {
    throw new EncoderLoadError(
      `@xenova/transformers is not installed (needed for encoder "${modelId}"): ${err}`,
    );
  }
  const { AutoTokenizer, AutoProcessor, CLIPTextModelWithProjection, CLIPVisionModelWithProjection, RawImage } = tf;
  let tokenizer: any, textModel: any, processor: any, visionModel: any;
  try {
    tokenizer = await AutoTokenizer.from_pretrained(modelId);
    textModel = await CLIPTextModelWithProjection.from_pretrained(modelId, { device });
    processor = await AutoProcessor.from_pretrained(modelId);
    visionModel = await CLIPVisionModelWithProjection.from_pretrained(modelId, { device });
  } catch (err) {
    throw new EncoderLoadError(`failed to load encoder "${modelId}": ${err}`);
  }

  async function embedTexts(texts: string[]): Promise<Float64Array[]> {
    const inputs = tokenizer(texts, { padding: true, truncation: true });
    const { text_embeds } = await textModel(inputs);
    const [rows, dim] = text_embeds.dims;
    const out: Float64Array[] = [];
    for (let i = 0; i < rows; i++) {
      out.push(Float64Array.from(text_embeds.data.slice(i * dim, (i + 1) * dim)));
    }
    return out;
  }

  async function embedImages(paths: string[]): Promise<Float64Array[]> {
    const images = await Promise.all(paths.map((p: string) => RawImage.read(p)));
    const inputs = await processor(images);
    const { image_embeds } = await visionModel(inputs);
    const [rows, dim] = image_embeds.dims;
    const out: Float64Array[] = [];
    for (let i = 0; i < rows; i++) {
      out.push(Float64Array.from(image_embeds.data.slice(i * dim, (i + 1) * dim)));
    }
    return out;
  }

  const probeDim = (await embedTexts(["probe"]))[0].length;
  return {
    name: modelId,
    textDim: probeDim,
    imageDim: probeDim,
    embedTexts,
    embedImages,
  };
}

/** "toy", "toy:<dim>" or "xenova:<modelId>". */
export async function getEncoder(identifier: string, device: string): Promise<Encoder> {
  if (identifier === "toy") return toyEncoder(16);
  if (identifier.startsWith("toy:")) {
    return toyEncoder(Number(identifier.slice(4)));
  }
  if (identifier.startsWith("xenova:")) {
    return transformersEncoder(identifier.slice(7), device);
  }
  throw new EncoderLoadError(
    `unknown encoder "${identifier}" (expected "toy[:dim]" or "xenova:<modelId>")`,
  );
}
