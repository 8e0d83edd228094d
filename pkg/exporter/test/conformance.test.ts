/**
 * Round trip into the training harness itself: every exported file must load
 * there with zero unit-norm warnings and identical N, d, and labels. Spawns
 * python3 with the `ega` package installed.
 */
import { execFile } from "child_process";
import { mkdtemp, readFile } from "fs/promises";
import { tmpdir } from "os";
import { join } from "path";
import { promisify } from "util";
import { describe, expect, it } from "vitest";
import { decodeEgae } from "../src/egae.js";
import { runExport } from "../src/export.js";

const run = promisify(execFile);

const LOADER_SCRIPT = `
import json, logging, sys

records = []
class Capture(logging.Handler):
    def emit(self, record):
        records.append(record.getMessage())

logging.getLogger("ega").addHandler(Capture())
logging.getLogger("ega").setLevel(logging.WARNING)

from ega.data import load_embeddings

es = load_embeddings(sys.argv[1])
print(json.dumps({
    "n": len(es),
    "d": es.d,
    "labels": es.labels.tolist(),
    "provenance": es.provenance,
    "warnings": records,
}))
`;

async function loadThroughHarness(path: string) {
  const { stdout } = await run("python3", ["-c", LOADER_SCRIPT, path]);
  return JSON.parse(stdout) as {
    n: number;
    d: number;
    labels: number[];
    provenance: string;
    warnings: string[];
  };
}

describe("primary-harness conformance", () => {
  it.each(["clip-vit-b32", "dinov2-large", "siglip"])(
    "%s stub export loads with zero norm warnings",
    async (backbone) => {
      const dir = await mkdtemp(join(tmpdir(), "conf-"));
      const out = join(dir, `${backbone}.egae`);
      const summary = await runExport({
        backbone,
        dataset: "synthetic",
        split: "test",
        out,
        batchSize: 64,
        device: "cpu",
        stub: true,
        weightsDir: "weights",
        dataDir: "data",
      });
      expect(summary.n).toBeGreaterThanOrEqual(100);

      const ours = decodeEgae(await readFile(out));
      const theirs = await loadThroughHarness(out);
      expect(theirs.warnings).toEqual([]);
      expect(theirs.n).toBe(ours.n);
      expect(theirs.d).toBe(ours.d);
      expect(theirs.labels).toEqual(Array.from(ours.labels));
      expect(theirs.provenance).toBe(`${backbone}/synthetic/test`);
    },
    60_000
  );
});
