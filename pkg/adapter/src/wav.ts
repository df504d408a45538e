/**
 * Minimal RIFF/WAVE decode + encode.
 *
 * Supports the two encodings we actually meet in practice: PCM16 and
 * IEEE float32, any channel count and sample rate. Anything else (or a
 * file that is not RIFF/WAVE at all, e.g. an mp4 we cannot demux here)
 * raises NoAudioError so the job can skip the file with a logged reason.
 */

import { readFileSync } from "node:fs";

export class NoAudioError extends Error {}

export interface WavData {
  sampleRate: number;
  channels: number;
  /** One Float64Array per channel, samples in [-1, 1]. */
  samples: Float64Array[];
  /** True when the on-disk encoding is already mono 16 kHz PCM16. */
  conformingPcm16Mono16k: boolean;
}

const FORMAT_PCM = 1;
const FORMAT_IEEE_FLOAT = 3;

export function decodeWav(path: string): WavData {
  let raw: Buffer;
  try {
    raw = readFileSync(path);
  } catch (err) {
    throw new NoAudioError(`cannot read ${path}: ${(err as Error).message}`);
  }
  return decodeWavBuffer(raw, path);
}

export function decodeWavBuffer(raw: Buffer, label = "<buffer>"): WavData {
  if (raw.length < 12 || raw.toString("ascii", 0, 4) !== "RIFF" || raw.toString("ascii", 8, 12) !== "WAVE") {
    throw new NoAudioError(`${label}: no decodable audio stream (not RIFF/WAVE)`);
  }

  let fmt: { format: number; channels: number; sampleRate: number; bitsPerSample: number } | null = null;
  let data: Buffer | null = null;
  let offset = 12;
  while (offset + 8 <= raw.length) {
    const chunkId = raw.toString("ascii", offset, offset + 4);
    const chunkSize = raw.readUInt32LE(offset + 4);
    const body = raw.subarray(offset + 8, offset + 8 + chunkSize);
    if (chunkId === "fmt ") {
      if (body.length < 16) {
        throw new NoAudioError(`${label}: truncated fmt chunk`);
      }
      fmt = {
        format: body.readUInt16LE(0),
        channels: body.readUInt16LE(2),
        sampleRate: body.readUInt32LE(4),
        bitsPerSample: body.readUInt16LE(14),
      };
    } else if (chunkId === "data") {
      data = body;
    }
    // chunks are word-aligned
    offset += 8 + chunkSize + (chunkSize % 2);
  }

  if (fmt === null || data === null) {
    throw new NoAudioError(`${label}: missing fmt or data chunk`);
  }
  if (fmt.channels < 1 || fmt.sampleRate < 1) {
    throw new NoAudioError(`${label}: invalid fmt (${fmt.channels} ch, ${fmt.sampleRate} Hz)`);
  }

  let perChannel: Float64Array[];
  if (fmt.format === FORMAT_PCM && fmt.bitsPerSample === 16) {
    perChannel = deinterleavePcm16(data, fmt.channels);
  } else if (fmt.format === FORMAT_IEEE_FLOAT && fmt.bitsPerSample === 32) {
    perChannel = deinterleaveFloat32(data, fmt.channels);
  } else {
    throw new NoAudioError(
      `${label}: unsupported encoding (format ${fmt.format}, ${fmt.bitsPerSample}-bit)`,
    );
  }

  return {
    sampleRate: fmt.sampleRate,
    channels: fmt.channels,
    samples: perChannel,
    conformingPcm16Mono16k:
      fmt.format === FORMAT_PCM && fmt.bitsPerSample === 16 && fmt.channels === 1 && fmt.sampleRate === 16000,
  };
}

function deinterleavePcm16(data: Buffer, channels: number): Float64Array[] {
  const frames = Math.floor(data.length / (2 * channels));
  const out = Array.from({ length: channels }, () => new Float64Array(frames));
  for (let i = 0; i < frames; i++) {
    for (let c = 0; c < channels; c++) {
      out[c]![i] = data.readInt16LE(2 * (i * channels + c)) / 32768;
    }
  }
  return out;
}

function deinterleaveFloat32(data: Buffer, channels: number): Float64Array[] {
  const frames = Math.floor(data.length / (4 * channels));
  const out = Array.from({ length: channels }, () => new Float64Array(frames));
  for (let i = 0; i < frames; i++) {
    for (let c = 0; c < channels; c++) {
      out[c]![i] = data.readFloatLE(4 * (i * channels + c));
    }
  }
  return out;
}

/** Average all channels into one. */
export function downmixMono(wav: WavData): Float64Array {
  if (wav.channels === 1) {
    return wav.samples[0]!;
  }
  const n = wav.samples[0]!.length;
  const mono = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    let acc = 0;
    for (let c = 0; c < wav.channels; c++) {
      acc += wav.samples[c]![i]!;
    }
    mono[i] = acc / wav.channels;
  }
  return mono;
}

/**
 * Linear-interpolation resampler.
 *
 * Good enough for conditioning VAD/embedding inputs; this is not the
 * place for a production anti-aliasing chain, and the downstream
 * consumers only contract on the container format.
 */
export function resampleLinear(x: Float64Array, fromRate: number, toRate: number): Float64Array {
  if (fromRate === toRate || x.length === 0) {
    return x;
  }
  const outLen = Math.max(1, Math.round((x.length * toRate) / fromRate));
  const out = new Float64Array(outLen);
  const step = fromRate / toRate;
  for (let i = 0; i < outLen; i++) {
    const pos = i * step;
    const i0 = Math.floor(pos);
    const i1 = Math.min(i0 + 1, x.length - 1);
    const frac = pos - i0;
    out[i] = x[Math.min(i0, x.length - 1)]! * (1 - frac) + x[i1]! * frac;
  }
  return out;
}

/** Scale so the largest |sample| hits `peak`; silence is left untouched. */
export function peakNormalize(x: Float64Array, peak = 0.95): Float64Array {
  let maxAbs = 0;
  for (let i = 0; i < x.length; i++) {
    const a = Math.abs(x[i]!);
    if (a > maxAbs) {
      maxAbs = a;
    }
  }
  if (maxAbs === 0) {
    return x;
  }
  const gain = peak / maxAbs;
  const out = new Float64Array(x.length);
  for (let i = 0; i < x.length; i++) {
    out[i] = x[i]! * gain;
  }
  return out;
}

export function encodeWavPcm16(samples: Float64Array, sampleRate: number): Buffer {
  const dataSize = samples.length * 2;
  const buf = Buffer.alloc(44 + dataSize);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + dataSize, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(FORMAT_PCM, 20);
  buf.writeUInt16LE(1, 22);
  buf.writeUInt32LE(sampleRate, 24);
  buf.writeUInt32LE(sampleRate * 2, 28);
  buf.writeUInt16LE(2, 32);
  buf.writeUInt16LE(16, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(dataSize, 40);
  for (let i = 0; i < samples.length; i++) {
    let q = Math.round(samples[i]! * 32767);
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    buf.writeInt16LE(q, 44 + 2 * i);
  }
  return buf;
}
