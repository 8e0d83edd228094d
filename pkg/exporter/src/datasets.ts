/**
 * Image sources. Each dataset yields fixed-order (pixels, label) records so
 * re-running an export writes an identical file.
 */
import { readFile, stat } from "fs/promises";
import { join } from "path";
import { fnv1a, mulberry32 } from "./prng.js";

export interface ImageRecord {
  width: number;
  height: number;
  /** RGB interleaved, length width*height*3 */
  pixels: Uint8Array;
  label: number;
}

export interface Dataset {
  name: string;
  split: string;
  records: ImageRecord[];
}

/**
 * Built-in procedural dataset: 10 classes of banded color patterns with
 * per-image noise. No downloads, always available; meant for format
 * conformance checks and smoke runs, not for measuring real backbones.
 */
function syntheticDataset(split: string): Dataset {
  const perClass = split === "train" ? 20 : 12;
  const side = 32;
  const records: ImageRecord[] = [];
  for (let cls = 0; cls < 10; cls++) {
    for (let i = 0; i < perClass; i++) {
      const rand = mulberry32(fnv1a(`synthetic/${split}/${cls}/${i}`));
      const pixels = new Uint8Array(side * side * 3);
      const freq = 1 + cls; // class controls the stripe frequency
      const phase = rand() * Math.PI;
      for (let y = 0; y < side; y++) {
        for (let x = 0; x < side; x++) {
          const t = Math.sin((freq * Math.PI * (x + y)) / side + phase);
          const base = 128 + 100 * t;
          const o = (y * side + x) * 3;
          pixels[o] = Math.max(0, Math.min(255, Math.round(base + 40 * (rand() - 0.5))));
          pixels[o + 1] = Math.max(0, Math.min(255, Math.round(255 - base + 40 * (rand() - 0.5))));
          pixels[o + 2] = Math.max(0, Math.min(255, Math.round(25 * cls + 40 * (rand() - 0.5))));
        }
      }
      records.push({ width: side, height: side, pixels, label: cls });
    }
  }
  return { name: "synthetic", split, records };
}

/**
 * CIFAR-100 in the published binary layout: per record one coarse-label
 * byte, one fine-label byte, then 3072 pixel bytes channel-planar
 * (1024 R, 1024 G, 1024 B), 32x32 row-major. Labels exported are the fine
 * class indices 0..99.
 */
async function cifar100Dataset(split: string, dataDir: string): Promise<Dataset> {
  if (split !== "train" && split !== "test") {
    throw new Error(`cifar-100 has splits train|test, not "${split}"`);
  }
  const path = join(dataDir, "cifar-100-binary", `${split}.bin`);
  try {
    await stat(path);
  } catch {
    throw new Error(
      `cifar-100 ${split} split not found at ${path}.\n` +
        `Download cifar-100-binary.tar.gz from https://www.cs.toronto.edu/~kriz/cifar.html, ` +
        `extract it under ${dataDir}, and retry.`
    );
  }
  const raw = await readFile(path);
  const recordSize = 2 + 3072;
  if (raw.length % recordSize !== 0) {
    throw new Error(`${path}: size ${raw.length} is not a multiple of ${recordSize}`);
  }
  const n = raw.length / recordSize;
  const records: ImageRecord[] = [];
  for (let r = 0; r < n; r++) {
    const base = r * recordSize;
    const label = raw[base + 1]; // fine label
    const planar = raw.subarray(base + 2, base + recordSize);
    const pixels = new Uint8Array(3072);
    for (let p = 0; p < 1024; p++) {
      pixels[p * 3] = planar[p];
      pixels[p * 3 + 1] = planar[1024 + p];
      pixels[p * 3 + 2] = planar[2048 + p];
    }
    records.push({ width: 32, height: 32, pixels, label });
  }
  return { name: "cifar-100", split, records };
}

export const DATASET_NAMES = ["synthetic", "cifar-100"] as const;

export async function loadDataset(
  name: string,
  split: string,
  dataDir: string
): Promise<Dataset> {
  switch (name) {
    case "synthetic":
      return syntheticDataset(split);
    case "cifar-100":
      return cifar100Dataset(split, dataDir);
    default:
      throw new Error(`unknown dataset "${name}" (known: ${DATASET_NAMES.join(", ")})`);
  }
}
