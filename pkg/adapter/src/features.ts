/**
 * Frame-level spectral features for the built-in diarisation and
 * embedding backends: Hann-windowed frames, a power-of-two FFT, and a
 * mel-spaced triangular filterbank.
 *
 * Everything here is plain float64 arithmetic with no data-dependent
 * branching, so repeated runs over the same samples produce identical
 * bits — the property the job-level idempotency contract leans on.
 */

export const FRAME_LEN = 400; // 25 ms at 16 kHz
export const FRAME_HOP = 160; // 10 ms at 16 kHz
export const FFT_SIZE = 512;
export const N_BANDS = 16;

const LOG_FLOOR = 1e-10;

function hannWindow(n: number): Float64Array {
  const w = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    w[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / (n - 1));
  }
  return w;
}

const HANN = hannWindow(FRAME_LEN);

/** In-place iterative radix-2 FFT over interleaved (re, im) pairs. */
function fftRadix2(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) {
      j ^= bit;
    }
    j ^= bit;
    if (i < j) {
      const tr = re[i]!;
      re[i] = re[j]!;
      re[j] = tr;
      const ti = im[i]!;
      im[i] = im[j]!;
      im[j] = ti;
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const ang = (-2 * Math.PI) / len;
    const wRe = Math.cos(ang);
    const wIm = Math.sin(ang);
    for (let start = 0; start < n; start += len) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < len / 2; k++) {
        const a = start + k;
        const b = start + k + len / 2;
        const tRe = re[b]! * curRe - im[b]! * curIm;
        const tIm = re[b]! * curIm + im[b]! * curRe;
        re[b] = re[a]! - tRe;
        im[b] = im[a]! - tIm;
        re[a] = re[a]! + tRe;
        im[a] = im[a]! + tIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
}

/** Power spectrum of one Hann-windowed frame (FFT_SIZE/2 + 1 bins). */
export function framePowerSpectrum(frame: Float64Array): Float64Array {
  const re = new Float64Array(FFT_SIZE);
  const im = new Float64Array(FFT_SIZE);
  const n = Math.min(frame.length, FRAME_LEN);
  for (let i = 0; i < n; i++) {
    re[i] = frame[i]! * HANN[i]!;
  }
  fftRadix2(re, im);
  const bins = FFT_SIZE / 2 + 1;
  const power = new Float64Array(bins);
  for (let i = 0; i < bins; i++) {
    power[i] = re[i]! * re[i]! + im[i]! * im[i]!;
  }
  return power;
}

function hzToMel(hz: number): number {
  return 2595 * Math.log10(1 + hz / 700);
}

function melToHz(mel: number): number {
  return 700 * (Math.pow(10, mel / 2595) - 1);
}

/**
 * Triangular mel filterbank as a dense (N_BANDS x bins) weight matrix
 * over the power-spectrum bins of a `sampleRate` signal.
 */
export function melFilterbank(sampleRate: number): Float64Array[] {
  const bins = FFT_SIZE / 2 + 1;
  const maxHz = sampleRate / 2;
  const melEdges: number[] = [];
  const lo = hzToMel(0);
  const hi = hzToMel(maxHz);
  for (let i = 0; i < N_BANDS + 2; i++) {
    melEdges.push(lo + ((hi - lo) * i) / (N_BANDS + 1));
  }
  const hzEdges = melEdges.map(melToHz);
  const binHz = sampleRate / FFT_SIZE;
  const bank: Float64Array[] = [];
  for (let b = 0; b < N_BANDS; b++) {
    const left = hzEdges[b]!;
    const center = hzEdges[b + 1]!;
    const right = hzEdges[b + 2]!;
    const weights = new Float64Array(bins);
    for (let i = 0; i < bins; i++) {
      const f = i * binHz;
      if (f > left && f < center) {
        weights[i] = (f - left) / (center - left);
      } else if (f >= center && f < right) {
        weights[i] = (right - f) / (right - center);
      }
    }
    bank.push(weights);
  }
  return bank;
}

export interface FrameFeatures {
  /** Frame start offsets in samples. */
  offsets: Int32Array;
  /** Per-frame RMS over the raw (unwindowed) frame. */
  rms: Float64Array;
  /** Per-frame mel-band powers, one Float64Array of N_BANDS per frame. */
  bandPowers: Float64Array[];
}

/**
 * Slide a FRAME_LEN/FRAME_HOP window over `x` and compute per-frame RMS
 * and mel-band powers. Signals shorter than one frame yield no frames.
 */
export function analyzeFrames(x: Float64Array, sampleRate: number): FrameFeatures {
  const bank = melFilterbank(sampleRate);
  const nFrames = x.length >= FRAME_LEN ? Math.floor((x.length - FRAME_LEN) / FRAME_HOP) + 1 : 0;
  const offsets = new Int32Array(nFrames);
  const rms = new Float64Array(nFrames);
  const bandPowers: Float64Array[] = [];
  const frame = new Float64Array(FRAME_LEN);
  for (let f = 0; f < nFrames; f++) {
    const start = f * FRAME_HOP;
    offsets[f] = start;
    let energy = 0;
    for (let i = 0; i < FRAME_LEN; i++) {
      const v = x[start + i]!;
      frame[i] = v;
      energy += v * v;
    }
    rms[f] = Math.sqrt(energy / FRAME_LEN);
    const spectrum = framePowerSpectrum(frame);
    const bands = new Float64Array(N_BANDS);
    for (let b = 0; b < N_BANDS; b++) {
      const weights = bank[b]!;
      let acc = 0;
      for (let i = 0; i < spectrum.length; i++) {
        acc += weights[i]! * spectrum[i]!;
      }
      bands[b] = acc;
    }
    bandPowers.push(bands);
  }
  return { offsets, rms, bandPowers };
}

/** Natural log of band power with a fixed floor, elementwise. */
export function logBands(bands: Float64Array): Float64Array {
  const out = new Float64Array(bands.length);
  for (let i = 0; i < bands.length; i++) {
    out[i] = Math.log(bands[i]! + LOG_FLOOR);
  }
  return out;
}

/** Band powers normalized to a distribution (sums to 1; zero stays zero). */
export function bandDistribution(bands: Float64Array): Float64Array {
  let total = 0;
  for (let i = 0; i < bands.length; i++) {
    total += bands[i]!;
  }
  const out = new Float64Array(bands.length);
  if (total > 0) {
    for (let i = 0; i < bands.length; i++) {
      out[i] = bands[i]! / total;
    }
  }
  return out;
}

export function cosineSimilarity(u: Float64Array, v: Float64Array): number {
  let dot = 0;
  let nu = 0;
  let nv = 0;
  for (let i = 0; i < u.length; i++) {
    dot += u[i]! * v[i]!;
    nu += u[i]! * u[i]!;
    nv += v[i]! * v[i]!;
  }
  if (nu === 0 || nv === 0) {
    return 0;
  }
  return dot / (Math.sqrt(nu) * Math.sqrt(nv));
}
