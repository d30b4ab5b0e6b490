/**
 * Raw input manifest: one row per image-text pair.
 *
 * CSV columns: pair_id,text,image_path,label. Pair ids must be unique,
 * image paths must exist, and labels must be Similar or Complementary.
 */

import fs from "node:fs";
import path from "node:path";
import Papa from "papaparse";

export const LABELS = ["Similar", "Complementary"] as const;
export type Label = (typeof LABELS)[number];

export interface ManifestRow {
  pairId: string;
  text: string;
  imagePath: string;
  label: Label;
}

export class ManifestError extends Error {}

const REQUIRED_COLUMNS = ["pair_id", "text", "image_path", "label"];

export function parseManifest(csvPath: string): ManifestRow[] {
  if (!fs.existsSync(csvPath)) {
    throw new ManifestError(`manifest not found: ${csvPath}`);
  }
  const parsed = Papa.parse<Record<string, string>>(fs.readFileSync(csvPath, "utf8"), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new ManifestError(`${csvPath}:${(e.row ?? 0) + 1}: ${e.message}`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const col of REQUIRED_COLUMNS) {
    if (!fields.includes(col)) {
      throw new ManifestError(`manifest is missing required column "${col}"`);
    }
  }
  const baseDir = path.dirname(path.resolve(csvPath));
  const seen = new Set<string>();
  return parsed.data.map((row, i) => {
    const line = i + 2; // 1-based, after the header
    const pairId = (row.pair_id ?? "").trim();
    if (!pairId) throw new ManifestError(`${csvPath}:${line}: empty pair_id`);
    if (seen.has(pairId)) throw new ManifestError(`${csvPath}:${line}: duplicate pair_id "${pairId}"`);
    seen.add(pairId);

    const label = (row.label ?? "").trim();
    if (!LABELS.includes(label as Label)) {
      throw new ManifestError(
        `${csvPath}:${line}: pair "${pairId}" has unsupported label "${label}" ` +
        `(expected ${LABELS.join(" or ")})`);
    }
    const imagePath = path.resolve(baseDir, (row.image_path ?? "").trim());
    if (!fs.existsSync(imagePath)) {
      throw new ManifestError(`${csvPath}:${line}: pair "${pairId}" image not found: ${imagePath}`);
    }
    return { pairId, text: row.text ?? "", imagePath, label: label as Label };
  });
}
