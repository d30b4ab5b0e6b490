/**
 * Text/image encoders producing 512-dim float32 vectors.
 *
 * The default encoder is pretrained CLIP ViT-B/32 via transformers.js;
 * raw projection outputs are stored without L2 normalization. The stub
 * encoder derives vectors from content hashes: deterministic, offline,
 * and byte-stable, for tests and air-gapped runs.
 */

import crypto from "node:crypto";
import fs from "node:fs";

export const EMBED_DIM = 512;

export interface Encoder {
  readonly name: string;
  readonly dim: number;
  encodeTexts(texts: string[]): Promise<Float32Array[]>;
  encodeImages(imagePaths: string[]): Promise<Float32Array[]>;
}

export class EncoderStartupError extends Error {}

const CLIP_MODEL = "Xenova/clip-vit-base-patch32";

export class ClipEncoder implements Encoder {
  readonly name = "clip";
  readonly dim = EMBED_DIM;
  private tokenizer: any;
  private processor: any;
  private textModel: any;
  private visionModel: any;
  private rawImage: any;
  private readonly batchSize: number;

  constructor(batchSize = 16) {
    this.batchSize = Math.max(1, batchSize);
  }

  /** Loads weights; fails with a startup error when they are unobtainable. */
  async init(): Promise<void> {
    try {
      // @ts-ignore optional dependency: absent in offline installs
      const tf: any = await import("@xenova/transformers");
      this.rawImage = tf.RawImage;
      this.tokenizer = await tf.AutoTokenizer.from_pretrained(CLIP_MODEL);
      this.textModel = await tf.CLIPTextModelWithProjection.from_pretrained(CLIP_MODEL, {
        quantized: false,
      });
      this.processor = await tf.AutoProcessor.from_pretrained(CLIP_MODEL);
      this.visionModel = await tf.CLIPVisionModelWithProjection.from_pretrained(CLIP_MODEL, {
        quantized: false,
      });
    } catch (err) {
      throw new EncoderStartupError(
        `cannot load the CLIP encoder (${CLIP_MODEL}): ` +
        `${err instanceof Error ? err.message : err}`);
    }
  }

  private async textBatch(texts: string[]): Promise<Float32Array[]> {
    const inputs = this.tokenizer(texts, { padding: true, truncation: true });
    const { text_embeds } = await this.textModel(inputs);
    return splitRows(text_embeds.data as Float32Array, texts.length, this.dim);
  }

  private async imageBatch(paths: string[]): Promise<Float32Array[]> {
    const images = await Promise.all(paths.map((p) => this.rawImage.read(p)));
    const inputs = await this.processor(images);
    const { image_embeds } = await this.visionModel(inputs);
    return splitRows(image_embeds.data as Float32Array, paths.length, this.dim);
  }

  async encodeTexts(texts: string[]): Promise<Float32Array[]> {
    return batched(texts, this.batchSize, (chunk) => this.textBatch(chunk));
  }

  async encodeImages(imagePaths: string[]): Promise<Float32Array[]> {
    return batched(imagePaths, this.batchSize, (chunk) => this.imageBatch(chunk));
  }
}

/**
 * Hash-seeded stand-in encoder. Identical content always maps to the
 * identical vector (texts by string, images by file bytes), so pipeline
 * round-trips and determinism checks run without model weights.
 */
export class StubEncoder implements Encoder {
  readonly name = "stub";
  readonly dim = EMBED_DIM;

  private vectorFor(kind: string, content: Buffer): Float32Array {
    const out = new Float32Array(this.dim);
    const seed = crypto.createHash("sha256")
      .update(kind).update(":").update(content).digest();
    let block = seed;
    let filled = 0;
    let counter = 0;
    while (filled < this.dim) {
      block = crypto.createHash("sha256")
        .update(seed).update(Buffer.from([counter & 0xff, counter >> 8])).digest();
      counter += 1;
      for (let i = 0; i + 4 <= block.length && filled < this.dim; i += 4) {
        out[filled] = (block.readUInt32LE(i) / 0xffffffff) * 2 - 1;
        filled += 1;
      }
    }
    return out;
  }

  async encodeTexts(texts: string[]): Promise<Float32Array[]> {
    return texts.map((t) => this.vectorFor("text", Buffer.from(t, "utf8")));
  }

  async encodeImages(imagePaths: string[]): Promise<Float32Array[]> {
    return imagePaths.map((p) => this.vectorFor("image", fs.readFileSync(p)));
  }
}

export async function createEncoder(name: string, batchSize: number): Promise<Encoder> {
  if (name === "stub") {
    return new StubEncoder();
  }
  if (name === "clip") {
    const encoder = new ClipEncoder(batchSize);
    await encoder.init();
    return encoder;
  }
  throw new Error(`unknown encoder "${name}" (expected clip or stub)`);
}

function splitRows(flat: Float32Array, rows: number, dim: number): Float32Array[] {
  if (flat.length !== rows * dim) {
    throw new Error(`encoder returned ${flat.length} floats for ${rows} rows of ${dim}`);
  }
  const out: Float32Array[] = [];
  for (let r = 0; r < rows; r++) {
    out.push(flat.slice(r * dim, (r + 1) * dim));
  }
  return out;
}

async function batched<T>(items: T[], size: number,
                          run: (chunk: T[]) => Promise<Float32Array[]>): Promise<Float32Array[]> {
  const out: Float32Array[] = [];
  for (let start = 0; start < items.length; start += size) {
    out.push(...await run(items.slice(start, start + size)));
  }
  return out;
}
