import { spawnSync } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { StubEncoder, createEncoder } from "../src/encoders.js";
import { extract } from "../src/extract.js";
import { parseManifest } from "../src/manifest.js";
import { IMAGE_BLOB, TEXT_BLOB, verifyStore } from "../src/store.js";

let dir: string;

beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "extract-"));
});

afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function tenRowManifest(): string {
  const lines = ["pair_id,text,image_path,label"];
  for (let i = 0; i < 10; i++) {
    const img = `img${i}.png`;
    fs.writeFileSync(path.join(dir, img), Buffer.from([i, i, i, i]));
    // rows 0 and 5 share the same text on purpose
    const text = i === 5 ? "flood warning issued for the county 0" :
      `flood warning issued for the county ${i}`;
    lines.push(`p${i},"${text}",${img},${i % 2 ? "Complementary" : "Similar"}`);
  }
  const file = path.join(dir, "manifest.csv");
  fs.writeFileSync(file, lines.join("\n") + "\n");
  return file;
}

function readRow(blobPath: string, row: number, dim: number): Float32Array {
  const buf = fs.readFileSync(blobPath);
  const out = new Float32Array(dim);
  for (let c = 0; c < dim; c++) out[c] = buf.readFloatLE((row * dim + c) * 4);
  return out;
}

describe("extract round trip", () => {
  it("ten rows make a store that passes the primary ingest with n=10, dim=512", async () => {
    const rows = parseManifest(tenRowManifest());
    const out = path.join(dir, "store");
    const result = await extract(rows, out, new StubEncoder());
    expect(result.n).toBe(10);
    expect(result.dim).toBe(512);

    expect(verifyStore(out).ok).toBe(true);

    const ingest = spawnSync("python3", ["-m", "itrc", "ingest", "--dir", out],
                             { encoding: "utf8" });
    expect(ingest.status, ingest.stderr).toBe(0);
    expect(ingest.stdout).toContain("OK, n=10, dim=512");
  });

  it("duplicate text rows yield identical vectors in deterministic mode", async () => {
    const rows = parseManifest(tenRowManifest());
    const out = path.join(dir, "store");
    const encoder = await createEncoder("stub", 1);
    await extract(rows, out, encoder);
    const a = readRow(path.join(out, TEXT_BLOB), 0, 512);
    const b = readRow(path.join(out, TEXT_BLOB), 5, 512);
    expect(Array.from(a)).toEqual(Array.from(b));
    // distinct texts must not collide
    const c = readRow(path.join(out, TEXT_BLOB), 1, 512);
    expect(Array.from(a)).not.toEqual(Array.from(c));
  });

  it("re-running the extraction is byte-identical", async () => {
    const rows = parseManifest(tenRowManifest());
    await extract(rows, path.join(dir, "s1"), new StubEncoder());
    await extract(rows, path.join(dir, "s2"), new StubEncoder());
    for (const blob of [TEXT_BLOB, IMAGE_BLOB, "manifest.json"]) {
      expect(fs.readFileSync(path.join(dir, "s1", blob))
        .equals(fs.readFileSync(path.join(dir, "s2", blob)))).toBe(true);
    }
  });

  it("corrupting a blob after extraction is caught by verifyStore", async () => {
    const rows = parseManifest(tenRowManifest());
    const out = path.join(dir, "store");
    await extract(rows, out, new StubEncoder());
    const blobPath = path.join(out, IMAGE_BLOB);
    const buf = fs.readFileSync(blobPath);
    fs.writeFileSync(blobPath, buf.subarray(0, buf.length - 4));
    const report = verifyStore(out);
    expect(report.ok).toBe(false);
    expect(report.failures.length).toBeGreaterThan(0);
  });

  it("empty manifest is rejected", async () => {
    await expect(extract([], path.join(dir, "s"), new StubEncoder()))
      .rejects.toThrow(/no rows/);
  });

  it("unknown encoder name is rejected", async () => {
    await expect(createEncoder("resnet", 4)).rejects.toThrow(/unknown encoder/);
  });
});
