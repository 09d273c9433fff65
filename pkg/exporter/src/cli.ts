#!/usr/bin/env node
/**
 * embed-exporter CLI.
 *
 *   embed-exporter images --list images.csv --model hash:512 --out dir/
 *   embed-exporter prototypes --classes classes.txt --model hash:512 --out dir/
 *   embed-exporter verify --dir dir/
 */

import { promises as fs } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { embedderFor } from "./embedder.js";
import { exportEmbeddings, parseImageList } from "./exportImages.js";
import { exportClassPrototypes } from "./exportPrototypes.js";
import { verifyManifest } from "./manifest.js";

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .scriptName("embed-exporter")
    .command(
      "images",
      "embed image files and emit features.alfp + labels.csv + manifest.json",
      (y) =>
        y
          .option("list", { type: "string", demandOption: true, describe: "file with one `path` or `path,class` per line" })
          .option("model", { type: "string", default: "hash:512", describe: "hash:<dim> or remote:<url>|<dim>" })
          .option("out", { type: "string", demandOption: true })
          .option("dataset", { type: "string", default: "unspecified" })
          .option("split", { type: "string", default: "unspecified" }),
      async (argv) => {
        const entries = parseImageList(await fs.readFile(argv.list, "utf8"));
        const result = await exportEmbeddings(entries, embedderFor(argv.model), argv.out, {
          dataset: argv.dataset,
          split: argv.split,
        });
        console.log(
          `exported ${result.exported} embeddings (${result.skipped} skipped) to ${result.outDir}`,
        );
      },
    )
    .command(
      "prototypes",
      "embed class-name prompts and emit prototypes.alfp + manifest.json",
      (y) =>
        y
          .option("classes", { type: "string", demandOption: true, describe: "text file, one class name per line" })
          .option("template", { type: "string", default: "a photo of a {}" })
          .option("model", { type: "string", default: "hash:512" })
          .option("out", { type: "string", demandOption: true })
          .option("dataset", { type: "string", default: "unspecified" }),
      async (argv) => {
        const names = (await fs.readFile(argv.classes, "utf8"))
          .split("\n")
          .map((line) => line.trim())
          .filter(Boolean);
        const target = await exportClassPrototypes(
          names,
          argv.template,
          embedderFor(argv.model),
          argv.out,
          { dataset: argv.dataset },
        );
        console.log(`wrote ${target}`);
      },
    )
    .command(
      "verify",
      "re-hash an export directory against its manifest",
      (y) => y.option("dir", { type: "string", demandOption: true }),
      async (argv) => {
        const manifest = await verifyManifest(argv.dir);
        console.log(
          `ok: ${Object.keys(manifest.files).length} files verified (model ${manifest.model})`,
        );
      },
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      console.error(`error: ${msg ?? err?.message}`);
      process.exit(1);
    })
    .parseAsync();
}

main().catch((error) => {
  console.error(`error: ${error instanceof Error ? error.message : error}`);
  process.exit(1);
});
