/** Manifest-to-store extraction: encode every pair, write the binary store. */

import { Encoder, EMBED_DIM } from "./encoders.js";
import { ManifestRow } from "./manifest.js";
import { writeStore } from "./store.js";

export interface ExtractResult {
  n: number;
  dim: number;
  outDir: string;
}

export async function extract(rows: ManifestRow[], outDir: string,
                              encoder: Encoder): Promise<ExtractResult> {
  if (rows.length === 0) {
    throw new Error("manifest has no rows");
  }
  const textRows = await encoder.encodeTexts(rows.map((r) => r.text));
  const imageRows = await encoder.encodeImages(rows.map((r) => r.imagePath));
  writeStore(outDir, rows.map((r) => ({ id: r.pairId, label: r.label })),
             textRows, imageRows, encoder.dim);
  return { n: rows.length, dim: EMBED_DIM, outDir };
}
