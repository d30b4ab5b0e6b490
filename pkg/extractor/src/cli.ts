#!/usr/bin/env node
/**
 * clip_extract: encode a pair_id,text,image_path,label manifest into an
 * embedding store, or verify an existing store directory.
 *
 *   clip_extract --manifest manifest.csv --out store/ [--deterministic]
 *   clip_extract verify --dir store/
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { createEncoder, EncoderStartupError } from "./encoders.js";
import { extract } from "./extract.js";
import { ManifestError, parseManifest } from "./manifest.js";
import { formatReport, verifyStore } from "./store.js";

async function runExtract(argv: {
  manifest: string; out: string; deterministic: boolean;
  encoder: string; batchSize: number;
}): Promise<number> {
  try {
    const rows = parseManifest(argv.manifest);
    // deterministic mode forces single-item CPU batches for byte-stable output
    const batchSize = argv.deterministic ? 1 : argv.batchSize;
    const encoder = await createEncoder(argv.encoder, batchSize);
    const result = await extract(rows, argv.out, encoder);
    console.log(`wrote ${result.outDir} (n=${result.n}, dim=${result.dim}, encoder=${encoder.name})`);
    return 0;
  } catch (err) {
    if (err instanceof EncoderStartupError) {
      console.error(`startup error: ${err.message}`);
    } else if (err instanceof ManifestError) {
      console.error(`manifest error: ${err.message}`);
    } else {
      console.error(`error: ${err instanceof Error ? err.message : err}`);
    }
    return 1;
  }
}

function runVerify(dir: string): number {
  const report = verifyStore(dir);
  console.log(formatReport(report));
  return report.ok ? 0 : 1;
}

const parser = yargs(hideBin(process.argv))
  .scriptName("clip_extract")
  .command("$0", "encode a manifest into an embedding store", (y) => y
    .option("manifest", { type: "string", demandOption: true,
                          describe: "CSV with pair_id,text,image_path,label" })
    .option("out", { type: "string", demandOption: true, describe: "store directory to write" })
    .option("deterministic", { type: "boolean", default: false,
                               describe: "single-batch CPU encoding, byte-stable output" })
    .option("encoder", { type: "string", default: "clip", choices: ["clip", "stub"],
                         describe: "clip = pretrained ViT-B/32; stub = offline hash-seeded" })
    .option("batch-size", { type: "number", default: 16 }))
  .command("verify", "check an existing store directory", (y) => y
    .option("dir", { type: "string", demandOption: true, describe: "store directory" }))
  .strict()
  .help();

const argv = await parser.parse();
if (argv._[0] === "verify") {
  process.exit(runVerify(argv.dir as string));
} else {
  process.exit(await runExtract(argv as any));
}
