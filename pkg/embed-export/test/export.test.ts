import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SEMANTIC_DIM, PHONETIC_DIM } from "../src/encoders.js";
import { ExportError, buildTable, readWordList, runExport } from "../src/export.js";
import { parseTsv } from "../src/table.js";
import { encodeWavPcm16 } from "../src/wav.js";
import { main as cliMain } from "../src/cli.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const WORDS76 = path.join(HERE, "..", "fixtures", "words76.txt");

let tmp: string;
beforeAll(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "embed-export-"));
});
afterAll(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

describe("word list", () => {
  it("loads the 76-word fixture", () => {
    expect(readWordList(WORDS76)).toHaveLength(76);
  });

  it("rejects empty lists and duplicates", () => {
    const p = path.join(tmp, "empty.txt");
    fs.writeFileSync(p, "\n# only a comment\n");
    expect(() => readWordList(p)).toThrow(/empty/);
    fs.writeFileSync(p, "night\nnight\n");
    expect(() => readWordList(p)).toThrow(/repeats/);
  });
});

describe("export jobs", () => {
  it("writes one row per word with constant dimension", () => {
    const out = path.join(tmp, "semantic.tsv");
    const table = runExport({ wordListPath: WORDS76, encoder: "semantic", outPath: out });
    expect(table.vectors.size).toBe(76);
    const back = parseTsv(fs.readFileSync(out, "utf-8"));
    expect(back.dim).toBe(SEMANTIC_DIM);
    expect(back.vectors.size).toBe(76);
  });

  it("combined dimension is semantic plus phonetic", () => {
    const words = readWordList(WORDS76);
    const sem = buildTable(words, "semantic");
    const pho = buildTable(words, "phonetic");
    const comb = buildTable(words, "combined");
    expect(comb.dim).toBe(sem.dim + pho.dim);
    const w = words[0];
    expect([...comb.vectors.get(w)!.slice(0, sem.dim)]).toEqual([...sem.vectors.get(w)!]);
    expect([...comb.vectors.get(w)!.slice(sem.dim)]).toEqual([...pho.vectors.get(w)!]);
  });

  it("re-running is byte-identical", () => {
    const a = path.join(tmp, "a.tsv");
    const b = path.join(tmp, "b.tsv");
    runExport({ wordListPath: WORDS76, encoder: "combined", outPath: a });
    runExport({ wordListPath: WORDS76, encoder: "combined", outPath: b });
    expect(fs.readFileSync(a)).toEqual(fs.readFileSync(b));
  });

  it("records the model version in the sidecar", () => {
    const out = path.join(tmp, "pho.tsv");
    runExport({ wordListPath: WORDS76, encoder: "phonetic", outPath: out });
    const meta = JSON.parse(fs.readFileSync(`${out}.meta.json`, "utf-8"));
    expect(meta.model_version).toBe("feat-phonetic/1");
    expect(meta.dim).toBe(PHONETIC_DIM);
    expect(meta.n_words).toBe(76);
  });

  it("acoustic export fails listing every missing clip", () => {
    const audio = path.join(tmp, "clips");
    fs.mkdirSync(audio, { recursive: true });
    const words = readWordList(WORDS76);
    const tone = Float64Array.from({ length: 800 }, (_, i) => Math.sin(i / 5));
    for (const w of words.slice(2)) {
      fs.writeFileSync(path.join(audio, `${w}.wav`), encodeWavPcm16(tone, 8000));
    }
    expect(() => buildTable(words, "acoustic", audio)).toThrow(
      new RegExp(`2 word\\(s\\): ${words[0]}, ${words[1]}`),
    );
    expect(() => buildTable(words, "acoustic")).toThrow(/audio-dir/);
  });

  it("acoustic export succeeds once clips are complete", () => {
    const audio = path.join(tmp, "clips");
    const words = readWordList(WORDS76);
    const tone = Float64Array.from({ length: 800 }, (_, i) => Math.sin(i / 3));
    for (const w of words.slice(0, 2)) {
      fs.writeFileSync(path.join(audio, `${w}.wav`), encodeWavPcm16(tone, 8000));
    }
    const table = buildTable(words, "acoustic", audio);
    expect(table.vectors.size).toBe(76);
  });

  it("unknown encoder is rejected", () => {
    expect(() => buildTable(["a"], "bert" as never)).toThrow(ExportError);
  });
});

describe("cli", () => {
  it("exports through the argv surface", () => {
    const out = path.join(tmp, "cli.tsv");
    const code = cliMain(["--words", WORDS76, "--encoder", "semantic", "--out", out]);
    expect(code).toBe(0);
    expect(parseTsv(fs.readFileSync(out, "utf-8")).vectors.size).toBe(76);
  });

  it("reports missing flags and bad jobs as nonzero", () => {
    expect(cliMain([])).toBe(2);
    expect(cliMain(["--words", path.join(tmp, "nope.txt"), "--encoder",
                    "semantic", "--out", path.join(tmp, "x.tsv")])).not.toBe(0);
  });
});
