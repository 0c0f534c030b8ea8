#!/usr/bin/env node
import { parseArgs } from "node:util";

import { EncoderName, Layer } from "./encoders.js";
import { runExport } from "./export.js";

const USAGE = `usage: embed-export --words <file> --encoder <name> --out <file.tsv>
                    [--audio-dir <dir>] [--layer final|sublexical]

Embeds each word of the list and writes a TSV table:
  #encoder=<name> dim=<D> version=1
  word\tv1\t...\tvD

Encoders: semantic | phonetic | acoustic | combined
(combined = semantic followed by phonetic, concatenated per word).`;

export function main(argv: string[]): number {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        words: { type: "string" },
        encoder: { type: "string" },
        out: { type: "string" },
        "audio-dir": { type: "string" },
        layer: { type: "string", default: "final" },
        help: { type: "boolean", default: false },
      },
    }));
  } catch (err) {
    console.error(String(err));
    console.error(USAGE);
    return 2;
  }
  if (values.help) {
    console.log(USAGE);
    return 0;
  }
  if (!values.words || !values.encoder || !values.out) {
    console.error("--words, --encoder, and --out are required");
    console.error(USAGE);
    return 2;
  }
  if (values.layer !== "final" && values.layer !== "sublexical") {
    console.error(`unknown layer '${values.layer}'`);
    return 2;
  }
  try {
    const table = runExport({
      wordListPath: values.words,
      encoder: values.encoder as EncoderName,
      outPath: values.out,
      audioDir: values["audio-dir"],
      layer: values.layer as Layer,
    });
    console.log(
      `wrote ${table.vectors.size} x ${table.dim} '${table.encoder}' table to ${values.out}`,
    );
    return 0;
  } catch (err) {
    if (err instanceof Error) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
