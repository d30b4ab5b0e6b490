import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { IMAGE_BLOB, TEXT_BLOB, verifyStore, writeStore } from "../src/store.js";

let dir: string;

beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "store-"));
});

afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function rows(n: number, dim: number, offset = 0): Float32Array[] {
  return Array.from({ length: n }, (_, r) => {
    const row = new Float32Array(dim);
    for (let c = 0; c < dim; c++) row[c] = offset + r + c / dim;
    return row;
  });
}

function write(n = 3, dim = 4): string {
  const out = path.join(dir, "store");
  const pairs = Array.from({ length: n }, (_, i) => ({
    id: `p${i}`, label: i % 2 ? "Complementary" : "Similar",
  }));
  writeStore(out, pairs, rows(n, dim), rows(n, dim, 100), dim);
  return out;
}

describe("writeStore", () => {
  it("writes little-endian float32 rows in manifest order", () => {
    const out = write(2, 3);
    const buf = fs.readFileSync(path.join(out, TEXT_BLOB));
    expect(buf.length).toBe(2 * 3 * 4);
    expect(buf.readFloatLE(0)).toBeCloseTo(0, 6);
    expect(buf.readFloatLE(3 * 4)).toBeCloseTo(1, 6);         // second row starts at 1
    const manifest = JSON.parse(fs.readFileSync(path.join(out, "manifest.json"), "utf8"));
    expect(manifest.format).toBe("iteb");
    expect(manifest.version).toBe(1);
    expect(manifest.pairs.map((p: any) => p.id)).toEqual(["p0", "p1"]);
  });

  it("rejects rows of the wrong width", () => {
    expect(() => writeStore(path.join(dir, "bad"), [{ id: "a", label: "Similar" }],
                            rows(1, 3), rows(1, 4), 4)).toThrow(/expected 4/);
  });
});

describe("verifyStore", () => {
  it("reports ok with counts for a fresh store", () => {
    const report = verifyStore(write(4, 5));
    expect(report.ok).toBe(true);
    expect(report.n).toBe(4);
    expect(report.dim).toBe(5);
    expect(report.labelCounts).toEqual({ Similar: 2, Complementary: 2 });
  });

  it("flags a truncated blob as size and checksum failure", () => {
    const out = write();
    const blobPath = path.join(out, IMAGE_BLOB);
    const buf = fs.readFileSync(blobPath);
    fs.writeFileSync(blobPath, buf.subarray(0, buf.length - 4));
    const report = verifyStore(out);
    expect(report.ok).toBe(false);
    expect(report.failures.some((f) => f.includes("bytes"))).toBe(true);
    expect(report.failures.some((f) => f.includes("sha256"))).toBe(true);
  });

  it("flags corrupted bytes via checksum", () => {
    const out = write();
    const blobPath = path.join(out, TEXT_BLOB);
    const buf = fs.readFileSync(blobPath);
    buf[0] ^= 0xff;
    fs.writeFileSync(blobPath, buf);
    const report = verifyStore(out);
    expect(report.ok).toBe(false);
    expect(report.failures.some((f) => f.includes("sha256"))).toBe(true);
  });

  it("flags non-finite values", () => {
    const out = write();
    const blobPath = path.join(out, TEXT_BLOB);
    const buf = fs.readFileSync(blobPath);
    buf.writeFloatLE(Number.NaN, 8);
    fs.writeFileSync(blobPath, buf);
    const report = verifyStore(out);
    expect(report.failures.some((f) => f.includes("non-finite"))).toBe(true);
  });

  it("flags an unsupported label naming the pair", () => {
    const out = write();
    const manifestPath = path.join(out, "manifest.json");
    const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf8"));
    manifest.pairs[1].label = "Unrelated";
    fs.writeFileSync(manifestPath, JSON.stringify(manifest));
    const report = verifyStore(out);
    expect(report.failures.some((f) => f.includes('"p1"') && f.includes("Unrelated"))).toBe(true);
  });

  it("distinguishes wrong row width from missing rows", () => {
    const out = write(4, 6);
    const manifestPath = path.join(out, "manifest.json");
    const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf8"));
    manifest.dim = 12;   // rows actually carry 6 floats
    fs.writeFileSync(manifestPath, JSON.stringify(manifest));
    const narrow = verifyStore(out);
    expect(narrow.failures.some((f) => f.includes("rows carry 6 floats"))).toBe(true);

    const out2 = write(4, 6);
    const manifest2 = JSON.parse(fs.readFileSync(path.join(out2, "manifest.json"), "utf8"));
    manifest2.n = 5;
    manifest2.pairs.push({ id: "p4", label: "Similar" });
    fs.writeFileSync(path.join(out2, "manifest.json"), JSON.stringify(manifest2));
    const short = verifyStore(out2);
    expect(short.failures.some((f) => f.includes("holds 4 rows"))).toBe(true);
  });

  it("reports a missing manifest", () => {
    const report = verifyStore(path.join(dir, "nothing"));
    expect(report.ok).toBe(false);
    expect(report.failures[0]).toContain("manifest.json");
  });
});
