import { Buffer } from "node:buffer";

export function tone(freqHz: number, durationS: number, rate = 16000, amplitude = 0.8): Float64Array {
  const n = Math.round(durationS * rate);
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    out[i] = amplitude * Math.sin((2 * Math.PI * freqHz * i) / rate);
  }
  return out;
}

export function silence(durationS: number, rate = 16000): Float64Array {
  return new Float64Array(Math.round(durationS * rate));
}

export function concat(...parts: Float64Array[]): Float64Array {
  const total = parts.reduce((acc, p) => acc + p.length, 0);
  const out = new Float64Array(total);
  let offset = 0;
  for (const part of parts) {
    out.set(part, offset);
    offset += part.length;
  }
  return out;
}

/** Interleave per-channel samples and wrap them in a WAV container. */
export function wavBuffer(channels: Float64Array[], rate: number, format: "pcm16" | "float32" = "pcm16"): Buffer {
  const nCh = channels.length;
  const frames = channels[0]!.length;
  const bytesPer = format === "pcm16" ? 2 : 4;
  const dataSize = frames * nCh * bytesPer;
  const buf = Buffer.alloc(44 + dataSize);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + dataSize, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(format === "pcm16" ? 1 : 3, 20);
  buf.writeUInt16LE(nCh, 22);
  buf.writeUInt32LE(rate, 24);
  buf.writeUInt32LE(rate * nCh * bytesPer, 28);
  buf.writeUInt16LE(nCh * bytesPer, 32);
  buf.writeUInt16LE(8 * bytesPer, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(dataSize, 40);
  for (let i = 0; i < frames; i++) {
    for (let c = 0; c < nCh; c++) {
      const v = channels[c]![i]!;
      const at = 44 + bytesPer * (i * nCh + c);
      if (format === "pcm16") {
        let q = Math.round(v * 32767);
        if (q > 32767) q = 32767;
        if (q < -32768) q = -32768;
        buf.writeInt16LE(q, at);
      } else {
        buf.writeFloatLE(v, at);
      }
    }
  }
  return buf;
}
