#!/usr/bin/env node
/** ega-export: embed an image dataset with a frozen backbone, write EGAE v1. */
import { parseArgs } from "util";
import { pathToFileURL } from "url";
import { BACKBONES } from "./backbones.js";
import { DATASET_NAMES } from "./datasets.js";
import { runExport, type ExportSpec } from "./export.js";

const USAGE = `usage: ega-export export --backbone <id> --dataset <name> --split <name> --out <path>
                  [--batch-size N] [--device cpu|cuda] [--stub]
                  [--weights-dir DIR] [--data-dir DIR]

backbones: ${Object.keys(BACKBONES).join(", ")}
datasets:  ${DATASET_NAMES.join(", ")}

--stub replaces the network with a deterministic seeded projection of the
same output width; use it for format conformance without model weights.
Weights default to $EGA_WEIGHTS_DIR, datasets to $EGA_DATA_DIR.`;

export async function main(argv: string[]): Promise<number> {
  if (argv[0] !== "export") {
    console.error(argv.length ? `unknown command "${argv[0]}"` : "missing command");
    console.error(USAGE);
    return 2;
  }
  let parsed;
  try {
    parsed = parseArgs({
      args: argv.slice(1),
      options: {
        backbone: { type: "string" },
        dataset: { type: "string" },
        split: { type: "string" },
        out: { type: "string" },
        "batch-size": { type: "string", default: "64" },
        device: { type: "string", default: "cpu" },
        stub: { type: "boolean", default: false },
        "weights-dir": { type: "string" },
        "data-dir": { type: "string" },
        help: { type: "boolean", default: false },
      },
    });
  } catch (err) {
    console.error((err as Error).message);
    console.error(USAGE);
    return 2;
  }
  const v = parsed.values;
  if (v.help) {
    console.log(USAGE);
    return 0;
  }
  for (const req of ["backbone", "dataset", "split", "out"] as const) {
    if (!v[req]) {
      console.error(`--${req} is required`);
      console.error(USAGE);
      return 2;
    }
  }
  const batchSize = Number(v["batch-size"]);
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    console.error(`--batch-size must be a positive integer, got "${v["batch-size"]}"`);
    return 2;
  }
  if (v.device !== "cpu" && v.device !== "cuda") {
    console.error(`--device must be cpu or cuda, got "${v.device}"`);
    return 2;
  }
  const spec: ExportSpec = {
    backbone: v.backbone!,
    dataset: v.dataset!,
    split: v.split!,
    out: v.out!,
    batchSize,
    device: v.device,
    stub: v.stub!,
    weightsDir: v["weights-dir"] ?? process.env.EGA_WEIGHTS_DIR ?? "weights",
    dataDir: v["data-dir"] ?? process.env.EGA_DATA_DIR ?? "data",
  };
  try {
    const summary = await runExport(spec);
    console.log(
      `wrote ${summary.out}: ${summary.n} x ${summary.d} (${summary.provenance})` +
        (spec.stub ? " [stub features]" : "")
    );
    return 0;
  } catch (err) {
    console.error(`export failed: ${(err as Error).message}`);
    return 1;
  }
}

const isDirect = process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href;
if (isDirect) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
