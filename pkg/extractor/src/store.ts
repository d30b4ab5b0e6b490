/**
 * Binary embedding store writer/verifier.
 *
 * A store directory holds manifest.json plus text.f32le / image.f32le:
 * raw row-major little-endian float32, one row per pair in manifest
 * order, with sha256 checksums recorded in the manifest.
 */

import crypto from "node:crypto";
import fs from "node:fs";
import path from "node:path";

import { LABELS } from "./manifest.js";

export const STORE_FORMAT = "iteb";
export const STORE_VERSION = 1;
export const TEXT_BLOB = "text.f32le";
export const IMAGE_BLOB = "image.f32le";

export interface StorePair {
  id: string;
  label: string;
}

function rowsToBuffer(rows: Float32Array[], dim: number): Buffer {
  const buf = Buffer.alloc(rows.length * dim * 4);
  rows.forEach((row, r) => {
    if (row.length !== dim) {
      throw new Error(`row ${r} has ${row.length} values, expected ${dim}`);
    }
    for (let c = 0; c < dim; c++) {
      buf.writeFloatLE(row[c], (r * dim + c) * 4);
    }
  });
  return buf;
}

function sha256(buf: Buffer): string {
  return crypto.createHash("sha256").update(buf).digest("hex");
}

export function writeStore(outDir: string, pairs: StorePair[],
                           textRows: Float32Array[], imageRows: Float32Array[],
                           dim: number): void {
  fs.mkdirSync(outDir, { recursive: true });
  const textBuf = rowsToBuffer(textRows, dim);
  const imageBuf = rowsToBuffer(imageRows, dim);
  const manifest = {
    format: STORE_FORMAT,
    version: STORE_VERSION,
    n: pairs.length,
    dim,
    pairs: pairs.map((p) => ({ id: p.id, label: p.label })),
    checksums: {
      [TEXT_BLOB]: sha256(textBuf),
      [IMAGE_BLOB]: sha256(imageBuf),
    },
  };
  fs.writeFileSync(path.join(outDir, TEXT_BLOB), textBuf);
  fs.writeFileSync(path.join(outDir, IMAGE_BLOB), imageBuf);
  fs.writeFileSync(path.join(outDir, "manifest.json"), JSON.stringify(manifest, null, 1));
}

export interface VerifyReport {
  ok: boolean;
  n: number;
  dim: number;
  labelCounts: Record<string, number>;
  failures: string[];
}

function checkBlob(dir: string, name: string, n: number, dim: number,
                   checksum: string | undefined, failures: string[]): void {
  const blobPath = path.join(dir, name);
  if (!fs.existsSync(blobPath)) {
    failures.push(`${name}: blob missing`);
    return;
  }
  const raw = fs.readFileSync(blobPath);
  const expected = n * dim * 4;
  if (raw.length !== expected) {
    if (n > 0 && raw.length % (4 * n) === 0) {
      failures.push(`${name}: rows carry ${raw.length / (4 * n)} floats but manifest declares dim=${dim}`);
    } else if (dim > 0 && raw.length % (4 * dim) === 0) {
      failures.push(`${name}: blob holds ${raw.length / (4 * dim)} rows but manifest declares n=${n}`);
    } else {
      failures.push(`${name}: blob is ${raw.length} bytes, expected ${expected}`);
    }
  }
  if (sha256(raw) !== checksum) {
    failures.push(`${name}: sha256 does not match manifest checksum`);
  }
  const count = Math.floor(raw.length / 4);
  for (let i = 0; i < count; i++) {
    const v = raw.readFloatLE(i * 4);
    if (!Number.isFinite(v)) {
      failures.push(`${name}: non-finite value at float ${i}`);
      break;
    }
  }
}

export function verifyStore(dir: string): VerifyReport {
  const failures: string[] = [];
  const labelCounts: Record<string, number> = {};
  let n = 0;
  let dim = 0;

  const manifestPath = path.join(dir, "manifest.json");
  if (!fs.existsSync(manifestPath)) {
    return { ok: false, n, dim, labelCounts, failures: ["manifest.json: missing"] };
  }
  let manifest: any;
  try {
    manifest = JSON.parse(fs.readFileSync(manifestPath, "utf8"));
  } catch (err) {
    return { ok: false, n, dim, labelCounts, failures: [`manifest.json: invalid JSON (${err})`] };
  }
  if (manifest.format !== STORE_FORMAT) failures.push(`format: "${manifest.format}" != "${STORE_FORMAT}"`);
  if (manifest.version !== STORE_VERSION) failures.push(`version: ${manifest.version} != ${STORE_VERSION}`);
  n = Number(manifest.n ?? 0);
  dim = Number(manifest.dim ?? 0);
  const pairs: Array<{ id?: string; label?: string }> = manifest.pairs ?? [];
  if (pairs.length !== n) failures.push(`pairs: manifest lists ${pairs.length} but declares n=${n}`);

  const seen = new Set<string>();
  for (const p of pairs) {
    if (!p.id) {
      failures.push("pair_id: empty");
      continue;
    }
    if (seen.has(p.id)) failures.push(`pair_id: duplicate "${p.id}"`);
    seen.add(p.id);
    const label = p.label ?? "";
    if (!LABELS.includes(label as any)) {
      failures.push(`label: pair "${p.id}" has unsupported label "${label}"`);
    }
    labelCounts[label] = (labelCounts[label] ?? 0) + 1;
  }

  checkBlob(dir, TEXT_BLOB, n, dim, manifest.checksums?.[TEXT_BLOB], failures);
  checkBlob(dir, IMAGE_BLOB, n, dim, manifest.checksums?.[IMAGE_BLOB], failures);
  return { ok: failures.length === 0, n, dim, labelCounts, failures };
}

export function formatReport(report: VerifyReport): string {
  if (report.ok) {
    const counts = Object.entries(report.labelCounts).sort()
      .map(([k, v]) => `${k}=${v}`).join(", ");
    return `OK, n=${report.n}, dim=${report.dim}, ${counts}`;
  }
  return ["FAILED:", ...report.failures.map((f) => `  - ${f}`)].join("\n");
}
