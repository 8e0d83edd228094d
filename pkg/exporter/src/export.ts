/** Orchestration: dataset -> frozen backbone -> unit rows -> EGAE file. */
import { getBackbone, onnxFeaturizer, stubFeaturizer, type Featurizer } from "./backbones.js";
import { loadDataset } from "./datasets.js";
import { writeEgaeAtomic, type EgaeFile } from "./egae.js";

export interface ExportSpec {
  backbone: string;
  dataset: string;
  split: string;
  out: string;
  batchSize: number;
  device: "cpu" | "cuda";
  /** seeded random-feature network instead of real weights */
  stub: boolean;
  weightsDir: string;
  dataDir: string;
}

export interface ExportSummary {
  n: number;
  d: number;
  provenance: string;
  out: string;
}

export async function runExport(spec: ExportSpec): Promise<ExportSummary> {
  if (spec.batchSize < 1) {
    throw new Error(`batch size must be >= 1, got ${spec.batchSize}`);
  }
  const backbone = getBackbone(spec.backbone);
  const dataset = await loadDataset(spec.dataset, spec.split, spec.dataDir);
  if (dataset.records.length === 0) {
    throw new Error(`${spec.dataset}/${spec.split}: dataset is empty`);
  }
  const featurizer: Featurizer = spec.stub
    ? stubFeaturizer(backbone)
    : await onnxFeaturizer(backbone, spec.weightsDir);

  const n = dataset.records.length;
  const d = backbone.dim;
  const vectors = new Float32Array(n * d);
  const labels = new Uint32Array(n);
  for (let start = 0; start < n; start += spec.batchSize) {
    const batch = dataset.records.slice(start, start + spec.batchSize);
    const rows = await featurizer.embed(batch);
    rows.forEach((row, i) => {
      // normalize in f64 so the stored f32 rows are unit within rounding
      let norm = 0;
      for (let j = 0; j < d; j++) norm += row[j] * row[j];
      norm = Math.sqrt(norm);
      if (!(norm > 1e-12)) {
        throw new Error(`row ${start + i}: embedding norm ${norm} is degenerate`);
      }
      for (let j = 0; j < d; j++) vectors[(start + i) * d + j] = row[j] / norm;
      labels[start + i] = batch[i].label;
    });
  }

  const provenance = `${spec.backbone}/${spec.dataset}/${spec.split}`;
  const file: EgaeFile = { d, n, vectors, labels, provenance };
  await writeEgaeAtomic(spec.out, file);
  return { n, d, provenance, out: spec.out };
}
