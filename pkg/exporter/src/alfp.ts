/**
 * ALFP feature-file writer/reader plus the CSV/TSV side formats.
 *
 * Layout (all little-endian): magic "ALFP", u32 version (1), u64 row
 * count n, u32 dim d — 20 header bytes — then n*d float32 values
 * row-major, then n u64 ids. File length is exactly 20 + 4nd + 8n.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

const MAGIC = "ALFP";
export const HEADER_BYTES = 20;
const MAX_SIGNED_64 = (1n << 63n) - 1n;

export interface FeatureTable {
  ids: bigint[];
  /** row-major n x d */
  features: Float32Array;
  dim: number;
}

export function encodeFeatures(ids: bigint[], features: Float32Array, dim: number): Buffer {
  const n = ids.length;
  if (dim <= 0 || features.length !== n * dim) {
    throw new Error(`feature buffer length ${features.length} does not match n=${n} d=${dim}`);
  }
  const buf = Buffer.alloc(HEADER_BYTES + 4 * n * dim + 8 * n);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(1, 4);
  buf.writeBigUInt64LE(BigInt(n), 8);
  buf.writeUInt32LE(dim, 16);
  for (let i = 0; i < features.length; i++) {
    buf.writeFloatLE(features[i], HEADER_BYTES + 4 * i);
  }
  const idBase = HEADER_BYTES + 4 * n * dim;
  ids.forEach((id, i) => {
    if (id < 0n || id > MAX_SIGNED_64) {
      throw new Error(`id ${id} outside the non-negative signed 64-bit range`);
    }
    buf.writeBigUInt64LE(id, idBase + 8 * i);
  });
  return buf;
}

export function decodeFeatures(buf: Buffer): FeatureTable {
  if (buf.length < HEADER_BYTES || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error("not an ALFP file (bad magic or truncated header)");
  }
  const version = buf.readUInt32LE(4);
  if (version !== 1) throw new Error(`unsupported ALFP version ${version}`);
  const n = Number(buf.readBigUInt64LE(8));
  const dim = buf.readUInt32LE(16);
  const expected = HEADER_BYTES + 4 * n * dim + 8 * n;
  if (buf.length !== expected) {
    throw new Error(`file is ${buf.length} bytes, header implies exactly ${expected}`);
  }
  const features = new Float32Array(n * dim);
  for (let i = 0; i < features.length; i++) {
    features[i] = buf.readFloatLE(HEADER_BYTES + 4 * i);
  }
  const ids: bigint[] = [];
  const idBase = HEADER_BYTES + 4 * n * dim;
  for (let i = 0; i < n; i++) {
    ids.push(buf.readBigUInt64LE(idBase + 8 * i));
  }
  return { ids, features, dim };
}

/** Write a file atomically: temp sibling + rename. */
export async function atomicWrite(filePath: string, data: Buffer | string): Promise<void> {
  const dir = path.dirname(path.resolve(filePath));
  await fs.mkdir(dir, { recursive: true });
  const tmp = path.join(dir, `.tmp-exporter-${process.pid}-${Math.random().toString(36).slice(2)}`);
  await fs.writeFile(tmp, data);
  await fs.rename(tmp, filePath);
}

export async function writeFeatureFile(
  filePath: string,
  ids: bigint[],
  features: Float32Array,
  dim: number,
): Promise<void> {
  await atomicWrite(filePath, encodeFeatures(ids, features, dim));
}

export async function readFeatureFile(filePath: string): Promise<FeatureTable> {
  return decodeFeatures(await fs.readFile(filePath));
}

export function labelsCsv(entries: Array<{ id: bigint; cls: number }>): string {
  return entries.map((e) => `${e.id},${e.cls}`).join("\n") + (entries.length ? "\n" : "");
}

export function captionsTsv(entries: Array<{ id: bigint; caption: string }>): string {
  for (const e of entries) {
    if (/[\t\n]/.test(e.caption)) {
      throw new Error(`caption for id ${e.id} contains a tab or newline`);
    }
  }
  return entries.map((e) => `${e.id}\t${e.caption}`).join("\n") + (entries.length ? "\n" : "");
}

/** Unit-normalize one row in double precision, then narrow to float32. */
export function normalizedRow(values: number[]): Float32Array {
  let sumSquares = 0;
  for (const v of values) sumSquares += v * v;
  const norm = Math.sqrt(sumSquares);
  if (norm === 0) throw new Error("zero-norm embedding cannot be normalized");
  return Float32Array.from(values, (v) => v / norm);
}
