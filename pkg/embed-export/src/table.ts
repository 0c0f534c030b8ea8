/**
 * Embedding table file contract.
 *
 * UTF-8 TSV whose first line is `#encoder=<name> dim=<D> version=1`,
 * followed by one `word<TAB>v1<TAB>...<TAB>vD` row per word. The format is
 * shared with the downstream analysis package, which validates it on read.
 */

export const FORMAT_VERSION = 1;

export class FormatError extends Error {}

export interface EmbeddingTable {
  encoder: string;
  dim: number;
  /** Insertion order is the row order on disk (kept sorted by word). */
  vectors: Map<string, Float64Array>;
}

export function makeTable(
  encoder: string,
  entries: Iterable<[string, Float64Array]>,
): EmbeddingTable {
  const vectors = new Map<string, Float64Array>();
  let dim = -1;
  for (const [word, vec] of entries) {
    if (vectors.has(word)) {
      throw new FormatError(`duplicate word '${word}'`);
    }
    if (dim === -1) dim = vec.length;
    if (vec.length !== dim) {
      throw new FormatError(
        `dimension mismatch for '${word}': ${vec.length} != ${dim}`,
      );
    }
    vectors.set(word, vec);
  }
  if (dim <= 0) throw new FormatError("table needs at least one embedding row");
  return { encoder, dim, vectors };
}

/** Shortest round-trip decimal form; integers keep a trailing `.0`. */
function formatValue(x: number): string {
  if (!Number.isFinite(x)) throw new FormatError(`non-finite value ${x}`);
  const s = String(x);
  return Number.isInteger(x) && !s.includes("e") ? `${s}.0` : s;
}

export function formatTsv(table: EmbeddingTable): string {
  const lines = [`#encoder=${table.encoder} dim=${table.dim} version=${FORMAT_VERSION}`];
  const words = [...table.vectors.keys()].sort();
  for (const word of words) {
    const vec = table.vectors.get(word)!;
    lines.push([word, ...[...vec].map(formatValue)].join("\t"));
  }
  return lines.join("\n") + "\n";
}

const HEADER_RE = /^#encoder=(\S+) dim=(\d+) version=(\d+)$/;

export function parseTsv(text: string): EmbeddingTable {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) throw new FormatError("empty file");
  const m = HEADER_RE.exec(lines[0]);
  if (!m) throw new FormatError(`bad header line: ${JSON.stringify(lines[0])}`);
  const [, encoder, dimStr, versionStr] = m;
  if (Number(versionStr) !== FORMAT_VERSION) {
    throw new FormatError(`unsupported version ${versionStr}`);
  }
  const dim = Number(dimStr);
  const entries: [string, Float64Array][] = [];
  for (const line of lines.slice(1)) {
    const fields = line.split("\t");
    if (fields.length !== dim + 1) {
      throw new FormatError(
        `row '${fields[0]}' has ${fields.length - 1} fields, expected ${dim}`,
      );
    }
    const vec = Float64Array.from(fields.slice(1), (f) => {
      const v = Number(f);
      if (!Number.isFinite(v)) throw new FormatError(`bad number ${f}`);
      return v;
    });
    entries.push([fields[0], vec]);
  }
  const table = makeTable(encoder, entries);
  if (table.dim !== dim) throw new FormatError("dim header does not match rows");
  return table;
}
