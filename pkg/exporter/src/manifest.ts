/** Export manifest: per-file SHA-256 checksums plus export metadata.
 *
 * One manifest.json covers a whole export directory. Each operation
 * (feature export, prototype export) owns a named component in it;
 * re-running an operation replaces its own component and file entries,
 * while other components are left alone, so combined directories and
 * deterministic re-exports both stay fully covered.
 */

import { createHash } from "node:crypto";
import { promises as fs } from "node:fs";
import path from "node:path";

import { atomicWrite, readFeatureFile } from "./alfp.js";

export interface ComponentCounts {
  exported: number;
  skipped: number;
}

export interface SkippedEntry {
  path: string;
  reason: string;
  component: string;
}

export interface ExportManifest {
  model: string;
  dataset: string;
  split: string;
  dim: number;
  counts: Record<string, ComponentCounts>; // component -> counts
  files: Record<string, string>; // file name -> "sha256:<hex>"
  skipped: SkippedEntry[];
}

export interface ComponentExport {
  component: string;
  model: string;
  dataset: string;
  split: string;
  dim: number;
  counts: ComponentCounts;
  files: Record<string, string>;
  skipped: Array<{ path: string; reason: string }>;
}

export function sha256Of(data: Buffer): string {
  return "sha256:" + createHash("sha256").update(data).digest("hex");
}

export async function checksumFile(filePath: string): Promise<string> {
  return sha256Of(await fs.readFile(filePath));
}

export async function readManifest(dir: string): Promise<ExportManifest> {
  const raw = await fs.readFile(path.join(dir, "manifest.json"), "utf8");
  return JSON.parse(raw) as ExportManifest;
}

export async function writeComponent(dir: string, update: ComponentExport): Promise<string> {
  const target = path.join(dir, "manifest.json");
  let manifest: ExportManifest | undefined;
  try {
    manifest = JSON.parse(await fs.readFile(target, "utf8")) as ExportManifest;
  } catch (error) {
    if ((error as NodeJS.ErrnoException).code !== "ENOENT") throw error;
  }
  if (manifest) {
    if (manifest.model !== update.model) {
      throw new Error(
        `directory already holds a ${manifest.model} export; refusing ${update.model}`,
      );
    }
    if (manifest.dim !== update.dim) {
      throw new Error(`dim mismatch with existing manifest (${manifest.dim} vs ${update.dim})`);
    }
  }
  const keep = (a: string | undefined, b: string) => (a && a !== "unspecified" ? a : b);
  const merged: ExportManifest = {
    model: update.model,
    dataset: keep(manifest?.dataset, update.dataset),
    split: keep(manifest?.split, update.split),
    dim: update.dim,
    counts: { ...(manifest?.counts ?? {}), [update.component]: update.counts },
    files: { ...(manifest?.files ?? {}), ...update.files },
    skipped: [
      ...(manifest?.skipped ?? []).filter((s) => s.component !== update.component),
      ...update.skipped.map((s) => ({ ...s, component: update.component })),
    ],
  };
  await atomicWrite(target, JSON.stringify(merged, null, 2) + "\n");
  return target;
}

/**
 * Re-hash every file the manifest names and re-read each feature
 * header; throws on any checksum or dimension mismatch.
 */
export async function verifyManifest(dir: string): Promise<ExportManifest> {
  const manifest = await readManifest(dir);
  for (const [name, expected] of Object.entries(manifest.files)) {
    const actual = await checksumFile(path.join(dir, name));
    if (actual !== expected) {
      throw new Error(`${name}: checksum mismatch (${actual} != ${expected})`);
    }
    if (name.endsWith(".alfp")) {
      const table = await readFeatureFile(path.join(dir, name));
      if (table.dim !== manifest.dim) {
        throw new Error(`${name}: dim ${table.dim} does not match manifest dim ${manifest.dim}`);
      }
    }
  }
  return manifest;
}
