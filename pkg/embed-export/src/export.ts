import * as fs from "node:fs";
import * as path from "node:path";

import {
  ACOUSTIC_DIM,
  ENCODER_NAMES,
  ENCODER_VERSIONS,
  EncoderName,
  Layer,
  acousticVector,
  combinedVector,
  phoneticVector,
  semanticVector,
} from "./encoders.js";
import { EmbeddingTable, formatTsv, makeTable } from "./table.js";
import { decodeWav } from "./wav.js";

export class ExportError extends Error {}

export interface ExportJob {
  wordListPath: string;
  encoder: EncoderName;
  outPath: string;
  /** Directory with one `<word>.wav` clip per word; required for acoustic. */
  audioDir?: string;
  layer?: Layer;
}

export function readWordList(filePath: string): string[] {
  const words = fs
    .readFileSync(filePath, "utf-8")
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0 && !l.startsWith("#"));
  if (words.length === 0) {
    throw new ExportError(`word list ${filePath} is empty`);
  }
  const seen = new Set<string>();
  for (const w of words) {
    if (seen.has(w)) throw new ExportError(`word list repeats '${w}'`);
    seen.add(w);
  }
  return words;
}

export function buildTable(
  words: string[],
  encoder: EncoderName,
  audioDir?: string,
  layer: Layer = "final",
): EmbeddingTable {
  if (!ENCODER_NAMES.includes(encoder)) {
    throw new ExportError(
      `unknown encoder '${encoder}' (choose from ${ENCODER_NAMES.join(", ")})`,
    );
  }
  if (encoder === "acoustic") {
    if (!audioDir) {
      throw new ExportError("acoustic encoder needs --audio-dir");
    }
    const missing = words.filter(
      (w) => !fs.existsSync(path.join(audioDir, `${w}.wav`)),
    );
    if (missing.length > 0) {
      throw new ExportError(
        `missing audio clips for ${missing.length} word(s): ${missing.join(", ")}`,
      );
    }
    return makeTable(
      encoder,
      words.map((w): [string, Float64Array] => {
        const clip = decodeWav(fs.readFileSync(path.join(audioDir!, `${w}.wav`)));
        return [w, acousticVector(clip)];
      }),
    );
  }
  const embed = { semantic: semanticVector, phonetic: phoneticVector,
                  combined: combinedVector }[encoder];
  return makeTable(encoder, words.map((w): [string, Float64Array] => [w, embed(w, layer)]));
}

/** Run one job: embed every word, write the TSV and a small JSON sidecar
 * recording the encoder version and inputs. Returns the table. */
export function runExport(job: ExportJob): EmbeddingTable {
  const words = readWordList(job.wordListPath);
  const table = buildTable(words, job.encoder, job.audioDir, job.layer ?? "final");
  fs.mkdirSync(path.dirname(path.resolve(job.outPath)), { recursive: true });
  fs.writeFileSync(job.outPath, formatTsv(table), "utf-8");
  const sidecar = {
    encoder: job.encoder,
    model_version: ENCODER_VERSIONS[job.encoder],
    layer: job.layer ?? "final",
    dim: table.dim,
    n_words: words.length,
  };
  fs.writeFileSync(
    `${job.outPath}.meta.json`,
    JSON.stringify(sidecar, null, 1) + "\n",
    "utf-8",
  );
  return table;
}

export { ACOUSTIC_DIM };
