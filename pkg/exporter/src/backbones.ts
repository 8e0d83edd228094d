/**
 * Vision backbone registry. Real inference loads published ONNX weights; the
 * --stub path swaps the network for a seeded random-feature projection with
 * the same output width, so the file format, preprocessing, and determinism
 * can be exercised without any downloads. Stub features say nothing about
 * real embedding quality.
 */
import { access } from "fs/promises";
import { join } from "path";
import type { ImageRecord } from "./datasets.js";
import { preprocess, poolToGrid, type Preprocess } from "./image.js";
import { fnv1a, gaussian, mulberry32 } from "./prng.js";

export interface BackboneSpec {
  id: string;
  dim: number;
  pp: Preprocess;
  /** file expected under the weights dir for real inference */
  weightsFile: string;
}

const CLIP_MEAN: [number, number, number] = [0.48145466, 0.4578275, 0.40821073];
const CLIP_STD: [number, number, number] = [0.26862954, 0.26130258, 0.27577711];
const IMAGENET_MEAN: [number, number, number] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [number, number, number] = [0.229, 0.224, 0.225];

export const BACKBONES: Record<string, BackboneSpec> = {
  "clip-vit-b32": {
    id: "clip-vit-b32",
    dim: 512,
    pp: { size: 224, mean: CLIP_MEAN, std: CLIP_STD },
    weightsFile: "clip-vit-b32.onnx",
  },
  "dinov2-large": {
    id: "dinov2-large",
    dim: 1024,
    pp: { size: 224, mean: IMAGENET_MEAN, std: IMAGENET_STD },
    weightsFile: "dinov2-large.onnx",
  },
  // SigLIP SO400M, published default preprocessing
  siglip: {
    id: "siglip",
    dim: 1152,
    pp: { size: 384, mean: [0.5, 0.5, 0.5], std: [0.5, 0.5, 0.5] },
    weightsFile: "siglip-so400m.onnx",
  },
};

export function getBackbone(id: string): BackboneSpec {
  const spec = BACKBONES[id];
  if (!spec) {
    throw new Error(`unknown backbone "${id}" (known: ${Object.keys(BACKBONES).join(", ")})`);
  }
  return spec;
}

export interface Featurizer {
  /** raw (not yet normalized) f64 features, one row per image */
  embed(batch: ImageRecord[]): Promise<Float64Array[]>;
}

const STUB_GRID = 16; // pooled patch grid feeding the random projection

/**
 * Deterministic stand-in network: preprocess exactly as the real backbone
 * would, average-pool to a patch grid, then apply a fixed Gaussian projection
 * keyed by the backbone id. Pure function of the input bytes.
 */
export function stubFeaturizer(spec: BackboneSpec): Featurizer {
  const inDim = 3 * STUB_GRID * STUB_GRID;
  const draw = gaussian(mulberry32(fnv1a(`stub/${spec.id}`)));
  const proj = new Float64Array(spec.dim * inDim);
  const scale = 1 / Math.sqrt(inDim);
  for (let i = 0; i < proj.length; i++) {
    proj[i] = draw() * scale;
  }
  return {
    async embed(batch) {
      return batch.map((img) => {
        const chw = preprocess(img, spec.pp);
        const f = poolToGrid(chw, spec.pp.size, STUB_GRID);
        const y = new Float64Array(spec.dim);
        for (let j = 0; j < spec.dim; j++) {
          let acc = 0;
          const row = j * inDim;
          for (let k = 0; k < inDim; k++) {
            acc += proj[row + k] * f[k];
          }
          y[j] = acc;
        }
        return y;
      });
    },
  };
}

/**
 * Real inference path: an ONNX session over the published image encoder.
 * Both the runtime and the weights are optional installs; missing either one
 * is reported with the exact path/package to provide.
 */
export async function onnxFeaturizer(spec: BackboneSpec, weightsDir: string): Promise<Featurizer> {
  const weightsPath = join(weightsDir, spec.weightsFile);
  try {
    await access(weightsPath);
  } catch {
    throw new Error(
      `${spec.id}: weights not found at ${weightsPath}.\n` +
        `Place the exported image encoder there (or pass --weights-dir), ` +
        `or use --stub for a weights-free conformance run.`
    );
  }
  let ort: any;
  try {
    // optional install, resolved at runtime only
    ort = await import("onnxruntime-node" + "");
  } catch {
    throw new Error(
      `${spec.id}: the onnxruntime-node package is required for real inference ` +
        `(npm install onnxruntime-node), or use --stub for a weights-free run.`
    );
  }
  const session = await ort.InferenceSession.create(weightsPath);
  const inputName = session.inputNames[0];
  const outputName = session.outputNames[0];
  const { size } = spec.pp;
  return {
    async embed(batch) {
      const data = new Float32Array(batch.length * 3 * size * size);
      batch.forEach((img, i) => data.set(preprocess(img, spec.pp), i * 3 * size * size));
      const input = new ort.Tensor("float32", data, [batch.length, 3, size, size]);
      const out = (await session.run({ [inputName]: input }))[outputName];
      const flat: Float32Array = out.data;
      return batch.map((_, i) => {
        const row = new Float64Array(spec.dim);
        for (let j = 0; j < spec.dim; j++) row[j] = flat[i * spec.dim + j];
        return row;
      });
    },
  };
}
