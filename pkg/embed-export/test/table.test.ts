import { describe, expect, it } from "vitest";

import { FormatError, formatTsv, makeTable, parseTsv } from "../src/table.js";

const entries: [string, Float64Array][] = [
  ["night", Float64Array.from([0.5, -0.25])],
  ["house", Float64Array.from([1, 0.125])],
];

describe("embedding table format", () => {
  it("writes the versioned header first", () => {
    const text = formatTsv(makeTable("semantic", entries));
    expect(text.split("\n")[0]).toBe("#encoder=semantic dim=2 version=1");
  });

  it("sorts rows by word and round-trips exactly", () => {
    const text = formatTsv(makeTable("toy", entries));
    const rows = text.trim().split("\n").slice(1);
    expect(rows[0].startsWith("house\t")).toBe(true);
    const back = parseTsv(text);
    expect(back.encoder).toBe("toy");
    expect(back.dim).toBe(2);
    expect([...back.vectors.get("night")!]).toEqual([0.5, -0.25]);
    expect(formatTsv(back)).toBe(text);
  });

  it("keeps integers float-shaped for cross-language parsers", () => {
    const text = formatTsv(makeTable("toy", [["w", Float64Array.from([1, -3])]]));
    expect(text).toContain("w\t1.0\t-3.0");
  });

  it("rejects duplicates and ragged rows", () => {
    expect(() => makeTable("t", [...entries, entries[0]])).toThrow(FormatError);
    expect(() =>
      makeTable("t", [["a", Float64Array.from([1])], ["b", Float64Array.from([1, 2])]]),
    ).toThrow(/dimension mismatch/);
  });

  it("rejects malformed files", () => {
    expect(() => parseTsv("")).toThrow(FormatError);
    expect(() => parseTsv("night\t1.0\n")).toThrow(/header/);
    expect(() => parseTsv("#encoder=x dim=1 version=9\nw\t1.0\n")).toThrow(/version/);
    expect(() => parseTsv("#encoder=x dim=2 version=1\nw\t1.0\n")).toThrow(/fields/);
    expect(() => parseTsv("#encoder=x dim=1 version=1\nw\tok\n")).toThrow(/number/);
  });
});
