/**
 * Embedding backends.
 *
 * `hash:<dim>` — deterministic offline embedder: SHA-256 of the content
 * seeds a counter-mode digest stream that fills the vector. No model
 * weights needed, stable across runs and machines; meant for format
 * round-trips, pipeline tests, and id-stable smoke data.
 *
 * `remote:<url>` — POSTs {"inputs": [...]} to an embedding server that
 * returns {"embeddings": [[...], ...]}; use this to plug in a real
 * image/text encoder served locally.
 */

import { createHash } from "node:crypto";

export interface Embedder {
  /** model identifier recorded in the manifest */
  readonly modelId: string;
  readonly dim: number;
  embedBytes(content: Buffer): Promise<number[]>;
  embedText(text: string): Promise<number[]>;
}

export class HashEmbedder implements Embedder {
  readonly modelId: string;
  constructor(readonly dim: number) {
    if (!Number.isInteger(dim) || dim < 2) throw new Error(`bad embedding dim ${dim}`);
    this.modelId = `hash-sha256-v1/d${dim}`;
  }

  private expand(seed: Buffer): number[] {
    const out: number[] = [];
    let counter = 0;
    while (out.length < this.dim) {
      const block = createHash("sha256")
        .update(seed)
        .update(Buffer.from(String(counter++)))
        .digest();
      for (let off = 0; off + 4 <= block.length && out.length < this.dim; off += 4) {
        // uint32 -> [-1, 1)
        out.push((block.readUInt32LE(off) / 2 ** 31) - 1);
      }
    }
    return out;
  }

  async embedBytes(content: Buffer): Promise<number[]> {
    return this.expand(createHash("sha256").update("bytes").update(content).digest());
  }

  async embedText(text: string): Promise<number[]> {
    return this.expand(createHash("sha256").update("text").update(text, "utf8").digest());
  }
}

export class RemoteEmbedder implements Embedder {
  readonly modelId: string;
  constructor(readonly url: string, readonly dim: number) {
    this.modelId = `remote/${url}/d${dim}`;
  }

  private async call(kind: "bytes" | "text", payload: string): Promise<number[]> {
    const response = await fetch(this.url, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, inputs: [payload] }),
    });
    if (!response.ok) {
      throw new Error(`embedding server responded ${response.status}`);
    }
    const body = (await response.json()) as { embeddings: number[][] };
    const vector = body.embeddings?.[0];
    if (!Array.isArray(vector) || vector.length !== this.dim) {
      throw new Error(
        `embedding server returned ${vector?.length ?? "no"} dims, expected ${this.dim}`,
      );
    }
    return vector;
  }

  async embedBytes(content: Buffer): Promise<number[]> {
    return this.call("bytes", content.toString("base64"));
  }

  async embedText(text: string): Promise<number[]> {
    return this.call("text", text);
  }
}

/** Parse a model spec like "hash:512" or "remote:http://host:port|512". */
export function embedderFor(spec: string): Embedder {
  if (spec.startsWith("hash:")) {
    return new HashEmbedder(Number(spec.slice(5)));
  }
  if (spec.startsWith("remote:")) {
    const rest = spec.slice(7);
    const [url, dim] = rest.split("|");
    if (!url || !dim) throw new Error(`remote spec needs remote:<url>|<dim>, got ${spec}`);
    return new RemoteEmbedder(url, Number(dim));
  }
  throw new Error(`unknown embedder spec ${spec} (use hash:<dim> or remote:<url>|<dim>)`);
}
