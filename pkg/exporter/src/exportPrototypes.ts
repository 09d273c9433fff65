/**
 * Class-prototype exporter: one normalized text embedding per class
 * name, rendered through a prompt template ("a photo of a {}"), emitted
 * as prototypes.alfp with ids 0..K-1 plus a checksummed manifest.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

import { normalizedRow, writeFeatureFile } from "./alfp.js";
import type { Embedder } from "./embedder.js";
import { checksumFile, writeComponent } from "./manifest.js";

export const PLACEHOLDER = "{}";

export function renderPrompt(template: string, className: string): string {
  if (!template.includes(PLACEHOLDER)) {
    throw new Error(`prompt template must contain "${PLACEHOLDER}", got: ${template}`);
  }
  return template.split(PLACEHOLDER).join(className);
}

export async function exportClassPrototypes(
  classNames: string[],
  template: string,
  embedder: Embedder,
  outDir: string,
  options: { dataset?: string } = {},
): Promise<string> {
  if (classNames.length === 0) {
    throw new Error("class list is empty");
  }
  const unique = new Set(classNames);
  if (unique.size !== classNames.length) {
    const dup = classNames.find((name, i) => classNames.indexOf(name) !== i);
    throw new Error(`duplicate class name: ${dup}`);
  }
  renderPrompt(template, classNames[0]); // validate the template up front

  const dim = embedder.dim;
  const features = new Float32Array(classNames.length * dim);
  const ids: bigint[] = [];
  for (let k = 0; k < classNames.length; k++) {
    const vector = await embedder.embedText(renderPrompt(template, classNames[k]));
    features.set(normalizedRow(vector), k * dim);
    ids.push(BigInt(k));
  }

  await fs.mkdir(outDir, { recursive: true });
  const target = path.join(outDir, "prototypes.alfp");
  await writeFeatureFile(target, ids, features, dim);
  await writeComponent(outDir, {
    component: "prototypes",
    model: embedder.modelId,
    dataset: options.dataset ?? "unspecified",
    split: "unspecified",
    dim,
    counts: { exported: classNames.length, skipped: 0 },
    files: { "prototypes.alfp": await checksumFile(target) },
    skipped: [],
  });
  return target;
}
