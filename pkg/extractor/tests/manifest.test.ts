import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { ManifestError, parseManifest } from "../src/manifest.js";

let dir: string;

beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "manifest-"));
});

afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function writeManifest(lines: string[], images: string[] = []): string {
  for (const img of images) {
    fs.writeFileSync(path.join(dir, img), Buffer.from(img));
  }
  const file = path.join(dir, "manifest.csv");
  fs.writeFileSync(file, lines.join("\n") + "\n");
  return file;
}

describe("parseManifest", () => {
  it("parses well-formed rows and resolves image paths", () => {
    const file = writeManifest(
      ["pair_id,text,image_path,label",
       "a,hello world,img0.png,Similar",
       'b,"with, comma",img1.png,Complementary'],
      ["img0.png", "img1.png"]);
    const rows = parseManifest(file);
    expect(rows).toHaveLength(2);
    expect(rows[0].pairId).toBe("a");
    expect(rows[1].text).toBe("with, comma");
    expect(path.isAbsolute(rows[1].imagePath)).toBe(true);
    expect(rows[1].label).toBe("Complementary");
  });

  it("rejects a missing column", () => {
    const file = writeManifest(["pair_id,text,label", "a,hi,Similar"]);
    expect(() => parseManifest(file)).toThrow(/image_path/);
  });

  it("rejects duplicate pair ids", () => {
    const file = writeManifest(
      ["pair_id,text,image_path,label",
       "a,x,img0.png,Similar",
       "a,y,img0.png,Similar"],
      ["img0.png"]);
    expect(() => parseManifest(file)).toThrow(/duplicate pair_id "a"/);
  });

  it("rejects labels outside the two classes, naming the pair", () => {
    const file = writeManifest(
      ["pair_id,text,image_path,label", "weird,x,img0.png,Unrelated"],
      ["img0.png"]);
    expect(() => parseManifest(file)).toThrow(ManifestError);
    expect(() => parseManifest(file)).toThrow(/"weird".*"Unrelated"/);
  });

  it("rejects missing image files with the pair id", () => {
    const file = writeManifest(
      ["pair_id,text,image_path,label", "p9,x,nope.png,Similar"]);
    expect(() => parseManifest(file)).toThrow(/"p9" image not found/);
  });

  it("rejects a missing manifest file", () => {
    expect(() => parseManifest(path.join(dir, "absent.csv"))).toThrow(/not found/);
  });
});
