/**
 * EGAE v1 container: the bit-exact interchange format the training harness
 * reads. Little-endian throughout.
 *
 *   magic "EGAE" | u32 version=1 | u32 d | u32 N
 *   N*d float32 vectors, row-major
 *   N   uint32 labels
 *   u32 provenance byte length | UTF-8 provenance
 */
import { open, rename, rm } from "fs/promises";
import { randomBytes } from "crypto";
import { dirname, join } from "path";

export const MAGIC = "EGAE";
export const VERSION = 1;

export interface EgaeFile {
  d: number;
  n: number;
  vectors: Float32Array; // length n*d, row-major
  labels: Uint32Array;
  provenance: string;
}

export function encodeEgae(file: EgaeFile): Buffer {
  const { d, n, vectors, labels, provenance } = file;
  if (vectors.length !== n * d) {
    throw new Error(`vectors length ${vectors.length} != n*d = ${n * d}`);
  }
  if (labels.length !== n) {
    throw new Error(`labels length ${labels.length} != n = ${n}`);
  }
  const prov = Buffer.from(provenance, "utf8");
  const size = 4 + 4 * 3 + 4 * n * d + 4 * n + 4 + prov.length;
  const buf = Buffer.alloc(size);
  let off = buf.write(MAGIC, 0, "ascii");
  off = buf.writeUInt32LE(VERSION, off);
  off = buf.writeUInt32LE(d, off);
  off = buf.writeUInt32LE(n, off);
  for (let i = 0; i < vectors.length; i++) {
    off = buf.writeFloatLE(vectors[i], off);
  }
  for (let i = 0; i < n; i++) {
    off = buf.writeUInt32LE(labels[i], off);
  }
  off = buf.writeUInt32LE(prov.length, off);
  prov.copy(buf, off);
  return buf;
}

export function decodeEgae(buf: Buffer): EgaeFile {
  if (buf.length < 16 || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error("not an EGAE file (bad magic)");
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`unsupported EGAE version ${version}`);
  }
  const d = buf.readUInt32LE(8);
  const n = buf.readUInt32LE(12);
  let off = 16;
  const vectors = new Float32Array(n * d);
  for (let i = 0; i < n * d; i++, off += 4) {
    vectors[i] = buf.readFloatLE(off);
  }
  const labels = new Uint32Array(n);
  for (let i = 0; i < n; i++, off += 4) {
    labels[i] = buf.readUInt32LE(off);
  }
  const provLen = buf.readUInt32LE(off);
  off += 4;
  const provenance = buf.toString("utf8", off, off + provLen);
  return { d, n, vectors, labels, provenance };
}

/** Write temp file in the target directory, fsync, then rename into place. */
export async function writeEgaeAtomic(path: string, file: EgaeFile): Promise<void> {
  const buf = encodeEgae(file);
  const tmp = join(dirname(path), `.${randomBytes(6).toString("hex")}.egae.tmp`);
  const fh = await open(tmp, "wx");
  try {
    await fh.writeFile(buf);
    await fh.sync();
  } catch (err) {
    await fh.close();
    await rm(tmp, { force: true });
    throw err;
  }
  await fh.close();
  await rename(tmp, path);
}
