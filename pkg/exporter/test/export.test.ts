import { mkdtemp, readFile } from "fs/promises";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";
import { loadDataset } from "../src/datasets.js";
import { decodeEgae } from "../src/egae.js";
import { runExport, type ExportSpec } from "../src/export.js";

async function scratch(): Promise<string> {
  return mkdtemp(join(tmpdir(), "export-"));
}

function spec(overrides: Partial<ExportSpec> = {}): ExportSpec {
  return {
    backbone: "clip-vit-b32",
    dataset: "synthetic",
    split: "test",
    out: "",
    batchSize: 32,
    device: "cpu",
    stub: true,
    weightsDir: "weights",
    dataDir: "data",
    ...overrides,
  };
}

describe("runExport", () => {
  it("writes one unit row per image with dataset labels", async () => {
    const dir = await scratch();
    const out = join(dir, "a.egae");
    const summary = await runExport(spec({ out }));
    expect(summary).toMatchObject({ n: 120, d: 512, provenance: "clip-vit-b32/synthetic/test" });

    const file = decodeEgae(await readFile(out));
    expect(file.n).toBe(120);
    expect(file.d).toBe(512);
    const dataset = await loadDataset("synthetic", "test", "data");
    expect(Array.from(file.labels)).toEqual(dataset.records.map((r) => r.label));
    for (let i = 0; i < file.n; i++) {
      let norm = 0;
      for (let j = 0; j < file.d; j++) norm += file.vectors[i * file.d + j] ** 2;
      expect(Math.abs(Math.sqrt(norm) - 1)).toBeLessThan(1e-6);
    }
  });

  it("is deterministic: rerun produces identical bytes", async () => {
    const dir = await scratch();
    const a = join(dir, "a.egae");
    const b = join(dir, "b.egae");
    await runExport(spec({ out: a }));
    await runExport(spec({ out: b }));
    expect((await readFile(a)).equals(await readFile(b))).toBe(true);
  });

  it("keys the provenance and width to the backbone", async () => {
    const dir = await scratch();
    for (const [backbone, d] of [
      ["dinov2-large", 1024],
      ["siglip", 1152],
    ] as const) {
      const out = join(dir, `${backbone}.egae`);
      const summary = await runExport(spec({ backbone, out, split: "train" }));
      expect(summary.d).toBe(d);
      expect(summary.provenance).toBe(`${backbone}/synthetic/train`);
    }
  });

  it("refuses unknown backbones and datasets by name", async () => {
    await expect(runExport(spec({ backbone: "resnet50" }))).rejects.toThrow(
      /unknown backbone "resnet50".*clip-vit-b32/s
    );
    await expect(runExport(spec({ dataset: "imagenet" }))).rejects.toThrow(
      /unknown dataset "imagenet".*cifar-100/s
    );
  });

  it("points at the expected file when cifar-100 is absent", async () => {
    const dir = await scratch();
    await expect(
      runExport(spec({ dataset: "cifar-100", dataDir: dir, out: join(dir, "c.egae") }))
    ).rejects.toThrow(new RegExp(`${dir}/cifar-100-binary/test.bin`));
    await expect(
      runExport(spec({ dataset: "cifar-100", split: "validation", dataDir: dir }))
    ).rejects.toThrow(/train\|test/);
  });

  it("names the missing weights file when run without --stub", async () => {
    const dir = await scratch();
    await expect(
      runExport(spec({ stub: false, weightsDir: dir, out: join(dir, "w.egae") }))
    ).rejects.toThrow(/clip-vit-b32\.onnx.*--stub/s);
  });
});
