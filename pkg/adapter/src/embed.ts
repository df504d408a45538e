/**
 * Built-in segment-embedding backend: per-band log-energy statistics
 * (mean and standard deviation over frames), L2-normalized.
 *
 * Fixed 32-dim output. Segments shorter than MIN_SEGMENT_S are below
 * the model minimum and must be skipped (and logged) by the caller.
 */

import { FRAME_HOP, FRAME_LEN, FrameFeatures, N_BANDS, logBands } from "./features.js";

export const EMBEDDER_ID = "fbank-stats-v1";
export const EMBEDDING_DIM = 2 * N_BANDS;
export const MIN_SEGMENT_S = 0.5;

/** Frames needed before mean/std statistics are meaningful. */
export function minFrames(sampleRate: number): number {
  return Math.max(2, Math.round((MIN_SEGMENT_S * sampleRate - FRAME_LEN) / FRAME_HOP) + 1);
}

export function embedSegment(features: FrameFeatures, frameStart: number, frameEnd: number): Float64Array {
  const n = frameEnd - frameStart;
  if (n < 2) {
    throw new Error(`segment too short to embed (${n} frames)`);
  }
  const mean = new Float64Array(N_BANDS);
  const logs: Float64Array[] = [];
  for (let f = frameStart; f < frameEnd; f++) {
    const lb = logBands(features.bandPowers[f]!);
    logs.push(lb);
    for (let b = 0; b < N_BANDS; b++) {
      mean[b] = mean[b]! + lb[b]!;
    }
  }
  for (let b = 0; b < N_BANDS; b++) {
    mean[b] = mean[b]! / n;
  }
  const std = new Float64Array(N_BANDS);
  for (const lb of logs) {
    for (let b = 0; b < N_BANDS; b++) {
      const d = lb[b]! - mean[b]!;
      std[b] = std[b]! + d * d;
    }
  }
  for (let b = 0; b < N_BANDS; b++) {
    std[b] = Math.sqrt(std[b]! / n);
  }

  const vec = new Float64Array(EMBEDDING_DIM);
  vec.set(mean, 0);
  vec.set(std, N_BANDS);
  let norm = 0;
  for (let i = 0; i < vec.length; i++) {
    norm += vec[i]! * vec[i]!;
  }
  norm = Math.sqrt(norm);
  if (norm > 0) {
    for (let i = 0; i < vec.length; i++) {
      vec[i] = vec[i]! / norm;
    }
  }
  return vec;
}
