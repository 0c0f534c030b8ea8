/** Minimal RIFF/WAVE reader: PCM 16-bit and IEEE float 32, any channel
 * count (channels are averaged to mono). */

export class WavError extends Error {}

export interface AudioClip {
  sampleRate: number;
  samples: Float64Array;
}

export function decodeWav(bytes: Buffer): AudioClip {
  if (bytes.length < 44 || bytes.toString("ascii", 0, 4) !== "RIFF" ||
      bytes.toString("ascii", 8, 12) !== "WAVE") {
    throw new WavError("not a RIFF/WAVE file");
  }
  let pos = 12;
  let format = 0, channels = 0, sampleRate = 0, bits = 0;
  let data: Buffer | null = null;
  while (pos + 8 <= bytes.length) {
    const id = bytes.toString("ascii", pos, pos + 4);
    const size = bytes.readUInt32LE(pos + 4);
    const body = bytes.subarray(pos + 8, pos + 8 + size);
    if (id === "fmt ") {
      format = body.readUInt16LE(0);
      channels = body.readUInt16LE(2);
      sampleRate = body.readUInt32LE(4);
      bits = body.readUInt16LE(14);
    } else if (id === "data") {
      data = body;
    }
    pos += 8 + size + (size % 2);
  }
  if (!data || channels < 1 || sampleRate <= 0) {
    throw new WavError("missing fmt or data chunk");
  }
  let frames: number;
  let read: (frame: number, ch: number) => number;
  if (format === 1 && bits === 16) {
    frames = Math.floor(data.length / (2 * channels));
    read = (f, c) => data!.readInt16LE(2 * (f * channels + c)) / 32768;
  } else if (format === 3 && bits === 32) {
    frames = Math.floor(data.length / (4 * channels));
    read = (f, c) => data!.readFloatLE(4 * (f * channels + c));
  } else {
    throw new WavError(`unsupported encoding (format=${format}, bits=${bits})`);
  }
  if (frames === 0) throw new WavError("empty data chunk");
  const samples = new Float64Array(frames);
  for (let f = 0; f < frames; f++) {
    let acc = 0;
    for (let c = 0; c < channels; c++) acc += read(f, c);
    samples[f] = acc / channels;
  }
  return { sampleRate, samples };
}

export function encodeWavPcm16(samples: Float64Array, sampleRate: number): Buffer {
  const data = Buffer.alloc(samples.length * 2);
  for (let i = 0; i < samples.length; i++) {
    const clamped = Math.max(-1, Math.min(1, samples[i]));
    data.writeInt16LE(Math.round(clamped * 32767), i * 2);
  }
  const header = Buffer.alloc(44);
  header.write("RIFF", 0, "ascii");
  header.writeUInt32LE(36 + data.length, 4);
  header.write("WAVE", 8, "ascii");
  header.write("fmt ", 12, "ascii");
  header.writeUInt32LE(16, 16);
  header.writeUInt16LE(1, 20);
  header.writeUInt16LE(1, 22);
  header.writeUInt32LE(sampleRate, 24);
  header.writeUInt32LE(sampleRate * 2, 28);
  header.writeUInt16LE(2, 32);
  header.writeUInt16LE(16, 34);
  header.write("data", 36, "ascii");
  header.writeUInt32LE(data.length, 40);
  return Buffer.concat([header, data]);
}
