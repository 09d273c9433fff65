/**
 * Image-list exporter: read files, embed, L2-normalize, and emit
 * features.alfp + labels.csv + manifest.json in the output directory.
 *
 * Ids are a stable 63-bit hash of the (forward-slashed) file path, so
 * re-exports and reordered lists keep the same ids. Unreadable files
 * are skipped with a warning and recorded in the manifest.
 */

import { createHash } from "node:crypto";
import { promises as fs } from "node:fs";
import path from "node:path";

import { atomicWrite, labelsCsv, normalizedRow, writeFeatureFile } from "./alfp.js";
import type { Embedder } from "./embedder.js";
import { checksumFile, writeComponent } from "./manifest.js";

export interface ImageEntry {
  path: string;
  /** optional class index; entries without one are left out of labels.csv */
  cls?: number;
}

export interface ExportResult {
  outDir: string;
  exported: number;
  skipped: number;
  manifestPath: string;
}

export function stableIdOf(filePath: string): bigint {
  const digest = createHash("sha256").update(filePath.split(path.sep).join("/")).digest();
  // first 8 bytes, cleared sign bit: fits the unsigned-on-disk / signed-in-engine contract
  return digest.readBigUInt64LE(0) & ((1n << 63n) - 1n);
}

/** Parse an image list file: one `path` or `path,class` per line. */
export function parseImageList(text: string): ImageEntry[] {
  const entries: ImageEntry[] = [];
  text.split("\n").forEach((line, index) => {
    const trimmed = line.trim();
    if (!trimmed || trimmed.startsWith("#")) return;
    const comma = trimmed.lastIndexOf(",");
    if (comma < 0) {
      entries.push({ path: trimmed });
      return;
    }
    const cls = Number(trimmed.slice(comma + 1));
    if (!Number.isInteger(cls) || cls < 0) {
      throw new Error(`line ${index + 1}: class must be a non-negative integer`);
    }
    entries.push({ path: trimmed.slice(0, comma), cls });
  });
  return entries;
}

export async function exportEmbeddings(
  entries: ImageEntry[],
  embedder: Embedder,
  outDir: string,
  options: { dataset?: string; split?: string } = {},
): Promise<ExportResult> {
  const ids: bigint[] = [];
  const rows: Float32Array[] = [];
  const labeled: Array<{ id: bigint; cls: number }> = [];
  const skipped: Array<{ path: string; reason: string }> = [];
  const seen = new Set<bigint>();

  for (const entry of entries) {
    let content: Buffer;
    try {
      content = await fs.readFile(entry.path);
    } catch (error) {
      const reason = error instanceof Error ? error.message : String(error);
      console.warn(`skipping ${entry.path}: ${reason}`);
      skipped.push({ path: entry.path, reason });
      continue;
    }
    const id = stableIdOf(entry.path);
    if (seen.has(id)) {
      skipped.push({ path: entry.path, reason: "duplicate path" });
      continue;
    }
    seen.add(id);
    ids.push(id);
    rows.push(normalizedRow(await embedder.embedBytes(content)));
    if (entry.cls !== undefined) labeled.push({ id, cls: entry.cls });
  }
  if (ids.length === 0) {
    throw new Error("nothing exported: every input was skipped or the list was empty");
  }

  const features = new Float32Array(ids.length * embedder.dim);
  rows.forEach((row, i) => features.set(row, i * embedder.dim));

  await fs.mkdir(outDir, { recursive: true });
  const featurePath = path.join(outDir, "features.alfp");
  await writeFeatureFile(featurePath, ids, features, embedder.dim);
  const labelsPath = path.join(outDir, "labels.csv");
  await atomicWrite(labelsPath, labelsCsv(labeled));

  const manifestPath = await writeComponent(outDir, {
    component: "features",
    model: embedder.modelId,
    dataset: options.dataset ?? "unspecified",
    split: options.split ?? "unspecified",
    dim: embedder.dim,
    counts: { exported: ids.length, skipped: skipped.length },
    files: {
      "features.alfp": await checksumFile(featurePath),
      "labels.csv": await checksumFile(labelsPath),
    },
    skipped,
  });
  return { outDir, exported: ids.length, skipped: skipped.length, manifestPath };
}
