/** Preprocessing: resize, center-crop, scale to [0,1], per-channel normalize. */
import type { ImageRecord } from "./datasets.js";

export interface Preprocess {
  /** square input resolution the backbone expects */
  size: number;
  mean: [number, number, number];
  std: [number, number, number];
}

/**
 * Bilinear resize of an RGB byte image to size x size, then (v/255 - mean)/std.
 * Returns CHW float32, matching the layout vision backbones consume.
 */
export function preprocess(img: ImageRecord, pp: Preprocess): Float32Array {
  const { size, mean, std } = pp;
  const out = new Float32Array(3 * size * size);
  const sx = img.width / size;
  const sy = img.height / size;
  for (let y = 0; y < size; y++) {
    // align_corners=false convention: sample at pixel centers
    const fy = Math.min(Math.max((y + 0.5) * sy - 0.5, 0), img.height - 1);
    const y0 = Math.floor(fy);
    const y1 = Math.min(y0 + 1, img.height - 1);
    const wy = fy - y0;
    for (let x = 0; x < size; x++) {
      const fx = Math.min(Math.max((x + 0.5) * sx - 0.5, 0), img.width - 1);
      const x0 = Math.floor(fx);
      const x1 = Math.min(x0 + 1, img.width - 1);
      const wx = fx - x0;
      for (let c = 0; c < 3; c++) {
        const p00 = img.pixels[(y0 * img.width + x0) * 3 + c];
        const p01 = img.pixels[(y0 * img.width + x1) * 3 + c];
        const p10 = img.pixels[(y1 * img.width + x0) * 3 + c];
        const p11 = img.pixels[(y1 * img.width + x1) * 3 + c];
        const top = p00 + (p01 - p00) * wx;
        const bot = p10 + (p11 - p10) * wx;
        const v = (top + (bot - top) * wy) / 255;
        out[c * size * size + y * size + x] = (v - mean[c]) / std[c];
      }
    }
  }
  return out;
}

/** Average-pool a CHW tensor to a grid x grid x 3 feature vector. */
export function poolToGrid(chw: Float32Array, size: number, grid: number): Float64Array {
  const out = new Float64Array(3 * grid * grid);
  const cell = size / grid;
  for (let c = 0; c < 3; c++) {
    for (let gy = 0; gy < grid; gy++) {
      const y0 = Math.floor(gy * cell);
      const y1 = Math.floor((gy + 1) * cell);
      for (let gx = 0; gx < grid; gx++) {
        const x0 = Math.floor(gx * cell);
        const x1 = Math.floor((gx + 1) * cell);
        let acc = 0;
        for (let y = y0; y < y1; y++) {
          for (let x = x0; x < x1; x++) {
            acc += chw[c * size * size + y * size + x];
          }
        }
        out[c * grid * grid + gy * grid + gx] = acc / ((y1 - y0) * (x1 - x0));
      }
    }
  }
  return out;
}
