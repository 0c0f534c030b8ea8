/**
 * Deterministic word encoders.
 *
 * Pretrained network encoders need model downloads that this exporter cannot
 * assume; these encoders derive stable feature vectors from the word string
 * (semantic, phonetic) or from an audio clip (acoustic) instead. The
 * surfaces match what a model-backed implementation would expose: a layer
 * selector, mean pooling over tokens or frames, and a recorded version
 * string per encoder.
 */

import { fnv1a, gaussianVector, l2normalize } from "./hash.js";
import type { AudioClip } from "./wav.js";

export type EncoderName = "semantic" | "phonetic" | "acoustic" | "combined";
export type Layer = "final" | "sublexical";

export const ENCODER_NAMES: EncoderName[] = [
  "semantic",
  "phonetic",
  "acoustic",
  "combined",
];

export const SEMANTIC_DIM = 48;
export const PHONETIC_DIM = 24;
export const ACOUSTIC_DIM = 16;

export const ENCODER_VERSIONS: Record<EncoderName, string> = {
  semantic: "feat-semantic/1",
  phonetic: "feat-phonetic/1",
  acoustic: "feat-acoustic/1",
  combined: "feat-semantic/1+feat-phonetic/1",
};

function tokens(word: string): string[] {
  const parts = word.toLowerCase().split(/[\s_-]+/).filter((t) => t.length > 0);
  if (parts.length === 0) throw new Error(`word ${JSON.stringify(word)} is empty`);
  return parts;
}

function meanPool(vectors: Float64Array[]): Float64Array {
  const out = new Float64Array(vectors[0].length);
  for (const v of vectors) for (let i = 0; i < v.length; i++) out[i] += v[i];
  return out.map((x) => x / vectors.length) as Float64Array;
}

/** Character-trigram hashing with boundary markers, one unit direction per
 * trigram; `final` adds a whole-token direction on top of the sublexical
 * features. Multi-token words are mean-pooled. */
export function semanticVector(word: string, layer: Layer = "final"): Float64Array {
  const perToken = tokens(word).map((token) => {
    const padded = `^${token}$`;
    const acc = new Float64Array(SEMANTIC_DIM);
    for (let i = 0; i + 3 <= padded.length; i++) {
      const tri = gaussianVector(fnv1a(padded.slice(i, i + 3), 0x5eed), SEMANTIC_DIM);
      for (let d = 0; d < SEMANTIC_DIM; d++) acc[d] += tri[d];
    }
    if (layer === "final") {
      const whole = gaussianVector(fnv1a(token, 0x7007), SEMANTIC_DIM);
      for (let d = 0; d < SEMANTIC_DIM; d++) acc[d] += 2 * whole[d];
    }
    return l2normalize(acc);
  });
  return l2normalize(meanPool(perToken));
}

const GRAPHEME_CLASSES: Record<string, number> = {};
for (const [cls, letters] of [
  "aeiou", "y", "mn", "pbtdkgcq", "fvszxh", "lr", "wj",
].entries()) {
  for (const ch of letters) GRAPHEME_CLASSES[ch] = cls;
}
const N_CLASSES = 8; // seven letter classes plus "other"

/** Grapheme-class profile: class frequencies, hashed class bigrams, length,
 * and the initial/final classes; a crude articulatory sketch of the word. */
export function phoneticVector(word: string, layer: Layer = "final"): Float64Array {
  const perToken = tokens(word).map((token) => {
    const classes = [...token].map((ch) => GRAPHEME_CLASSES[ch] ?? N_CLASSES - 1);
    const out = new Float64Array(PHONETIC_DIM);
    for (const c of classes) out[c] += 1 / classes.length;
    const nBigram = PHONETIC_DIM - N_CLASSES - 3;
    for (let i = 0; i + 1 < classes.length; i++) {
      out[N_CLASSES + (fnv1a(`${classes[i]}:${classes[i + 1]}`) % nBigram)] +=
        1 / Math.max(1, classes.length - 1);
      // small letter-level term so words with identical class profiles
      // (e.g. voiced/voiceless stop swaps) still get distinct vectors
      out[N_CLASSES + (fnv1a(token.slice(i, i + 2), 0x1e77) % nBigram)] +=
        0.15 / Math.max(1, classes.length - 1);
    }
    if (layer === "final") {
      out[PHONETIC_DIM - 3] = Math.min(1, token.length / 10);
      out[PHONETIC_DIM - 2] = (classes[0] + 1) / N_CLASSES;
      out[PHONETIC_DIM - 1] = (classes[classes.length - 1] + 1) / N_CLASSES;
    }
    return l2normalize(out);
  });
  return l2normalize(meanPool(perToken));
}

/** Log-RMS energy over equal time frames of the (mono-mixed) clip. */
export function acousticVector(clip: AudioClip): Float64Array {
  const { samples } = clip;
  const out = new Float64Array(ACOUSTIC_DIM);
  for (let f = 0; f < ACOUSTIC_DIM; f++) {
    const start = Math.floor((f * samples.length) / ACOUSTIC_DIM);
    const end = Math.max(start + 1, Math.floor(((f + 1) * samples.length) / ACOUSTIC_DIM));
    let energy = 0;
    for (let i = start; i < end; i++) energy += samples[i] * samples[i];
    out[f] = Math.log1p(Math.sqrt(energy / (end - start)));
  }
  return l2normalize(out);
}

/** Concatenation of the semantic and phonetic vectors, in that order; the
 * halves are kept as-is so D_combined = D_semantic + D_phonetic holds and
 * each half equals its standalone export. */
export function combinedVector(word: string, layer: Layer = "final"): Float64Array {
  const sem = semanticVector(word, layer);
  const pho = phoneticVector(word, layer);
  const out = new Float64Array(sem.length + pho.length);
  out.set(sem, 0);
  out.set(pho, sem.length);
  return out;
}

export function encoderDim(encoder: EncoderName): number {
  switch (encoder) {
    case "semantic": return SEMANTIC_DIM;
    case "phonetic": return PHONETIC_DIM;
    case "acoustic": return ACOUSTIC_DIM;
    case "combined": return SEMANTIC_DIM + PHONETIC_DIM;
  }
}
