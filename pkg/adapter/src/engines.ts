/**
 * Inference engines behind the wire protocol.
 *
 * The interfaces are the integration point for real checkpoints (a
 * CLIP-class embedder, a zero-shot detector, a multimodal generator);
 * swap them in via `buildEngines`. The built-in "local" engines are
 * deterministic CPU stand-ins: they honor every schema and dimensional
 * contract so the serving layer, clients, and conformance suites can be
 * exercised without model weights.
 */

import { createHash } from "node:crypto";
import { ImageMeta, parseImageMeta } from "./imageMeta";

export interface Detection {
  box: [number, number, number, number];
  score: number;
}

export interface GenerateSegments {
  texts: string[];
  images: Buffer[];
}

export interface Engines {
  embedText(text: string): number[];
  embedImage(data: Buffer): number[];
  detect(data: Buffer, query: string): Detection[];
  generate(segments: GenerateSegments, maxNewTokens: number, seed?: number): string;
  modelIds: Record<string, string>;
}

export class ImageDecodeError extends Error {}

/** Expand a hash of `key` into a unit-norm vector of length `dim`. */
function hashVector(key: string, dim: number): number[] {
  const out = new Array<number>(dim);
  let block = Buffer.alloc(0);
  let counter = 0;
  let byteIdx = 0;
  const nextByte = (): number => {
    if (byteIdx >= block.length) {
      block = createHash("sha256").update(`${key}${counter}`).digest();
      counter += 1;
      byteIdx = 0;
    }
    return block[byteIdx++];
  };
  for (let i = 0; i < dim; i++) {
    // two bytes per coordinate, centred on zero
    out[i] = (nextByte() * 256 + nextByte()) / 32768 - 1;
  }
  return l2Normalize(out);
}

function l2Normalize(vector: number[]): number[] {
  const norm = Math.sqrt(vector.reduce((acc, v) => acc + v * v, 0));
  if (norm === 0) return vector.map(() => 0);
  return vector.map((v) => v / norm);
}

function sumInto(target: number[], source: number[]): void {
  for (let i = 0; i < target.length; i++) target[i] += source[i];
}

export interface LocalEngineOptions {
  dim: number;
  seed: number;
  maxImageBytes: number;
}

export function buildEngines(options: LocalEngineOptions): Engines {
  const { dim, seed, maxImageBytes } = options;

  const embedText = (text: string): number[] => {
    const tokens = text.split(/[\s,]+/).filter(Boolean);
    const pooled = new Array<number>(dim).fill(0);
    for (const token of tokens.length ? tokens : [text]) {
      sumInto(pooled, hashVector(`${seed}:txt:${token}`, dim));
    }
    return l2Normalize(pooled);
  };

  const requireImage = (data: Buffer): ImageMeta => {
    if (data.length > maxImageBytes) {
      throw new ImageDecodeError(
        `image exceeds the configured limit of ${maxImageBytes} bytes`,
      );
    }
    const meta = parseImageMeta(data);
    if (!meta) {
      throw new ImageDecodeError("cannot determine image dimensions (PNG/JPEG expected)");
    }
    return meta;
  };

  const embedImage = (data: Buffer): number[] => {
    requireImage(data);
    // Byte-content features: a coarse histogram keyed into hash directions.
    const histogram = new Array<number>(32).fill(0);
    for (const byte of data) histogram[byte >> 3] += 1;
    const pooled = new Array<number>(dim).fill(0);
    for (let bucket = 0; bucket < histogram.length; bucket++) {
      const level = Math.round((histogram[bucket] / data.length) * 64);
      sumInto(pooled, hashVector(`${seed}:img:${bucket}:${level}`, dim));
    }
    return l2Normalize(pooled);
  };

  const detect = (data: Buffer, query: string): Detection[] => {
    const meta = requireImage(data);
    const digest = createHash("sha256")
      .update(`${seed}:det:${query}`)
      .update(data)
      .digest();
    const w = meta.width;
    const h = meta.height;
    if (w < 2 || h < 2) return [];
    // One centred proposal plus one digest-positioned proposal.
    const cx0 = Math.floor(w / 4);
    const cy0 = Math.floor(h / 4);
    const primary: Detection = {
      box: [cx0, cy0, Math.max(cx0 + 1, w - cx0), Math.max(cy0 + 1, h - cy0)],
      score: Number((0.5 + (digest[0] / 255) * 0.49).toFixed(4)),
    };
    const jx = digest[1] % Math.max(1, w - 2);
    const jy = digest[2] % Math.max(1, h - 2);
    const secondary: Detection = {
      box: [jx, jy, Math.min(w, jx + Math.max(2, w >> 2)), Math.min(h, jy + Math.max(2, h >> 2))],
      score: Number(((digest[3] / 255) * 0.4).toFixed(4)),
    };
    const detections = [primary];
    if (
      secondary.box[0] < secondary.box[2] &&
      secondary.box[1] < secondary.box[3] &&
      (secondary.box[0] !== primary.box[0] || secondary.box[1] !== primary.box[1])
    ) {
      detections.push(secondary);
    }
    return detections;
  };

  const generate = (
    segments: GenerateSegments,
    maxNewTokens: number,
    seedOverride?: number,
  ): string => {
    const effectiveSeed = seedOverride ?? seed;
    const digest = createHash("sha256")
      .update(`${effectiveSeed}:gen`)
      .update(segments.texts.join(""))
      .digest();
    const answer = digest[0] % 2 === 0 ? "yes" : "no";
    return answer.split(" ").slice(0, maxNewTokens).join(" ");
  };

  return {
    embedText,
    embedImage,
    detect,
    generate,
    modelIds: {
      text_embedder: "local-hash-text",
      image_embedder: "local-hash-image",
      detector: "local-header-detector",
      generator: "local-template-generator",
    },
  };
}
