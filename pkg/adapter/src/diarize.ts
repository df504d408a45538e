/**
 * Built-in diarisation backend: energy-gated voice activity detection
 * followed by greedy spectral clustering of the detected turns.
 *
 * This is a deterministic reference pipeline, not a trained model — the
 * provenance sidecar records its id so downstream users can tell these
 * labels apart from ones produced by a real diarisation system.
 */

import {
  FRAME_HOP,
  FRAME_LEN,
  FrameFeatures,
  analyzeFrames,
  bandDistribution,
  cosineSimilarity,
} from "./features.js";

export const DIARIZER_ID = "energy-vad-turns-v1";

/** Absolute RMS floor: frames below this are never speech. */
const RMS_FLOOR = 1e-3;
/** Fraction of the loudest frame's RMS a speech frame must reach. */
const RELATIVE_GATE = 0.05;
/** Runs separated by a shorter pause than this are merged (seconds). */
const MAX_PAUSE_S = 0.2;
/** Segments shorter than this are discarded (seconds). */
const MIN_SEGMENT_S = 0.3;
/** Same-speaker threshold on mean band-distribution cosine. */
const SPEAKER_SIM_THRESHOLD = 0.85;

export interface DiarSegment {
  onsetS: number;
  durationS: number;
  speaker: string;
  /** Frame index range [start, end) into the file's FrameFeatures. */
  frameStart: number;
  frameEnd: number;
}

export interface DiarResult {
  segments: DiarSegment[];
  features: FrameFeatures;
}

export function diarize(samples: Float64Array, sampleRate: number): DiarResult {
  const features = analyzeFrames(samples, sampleRate);
  const nFrames = features.rms.length;

  let maxRms = 0;
  for (let f = 0; f < nFrames; f++) {
    if (features.rms[f]! > maxRms) {
      maxRms = features.rms[f]!;
    }
  }
  const gate = Math.max(RMS_FLOOR, RELATIVE_GATE * maxRms);

  // contiguous speech-frame runs
  const runs: Array<[number, number]> = [];
  let runStart = -1;
  for (let f = 0; f < nFrames; f++) {
    const isSpeech = features.rms[f]! > gate;
    if (isSpeech && runStart < 0) {
      runStart = f;
    } else if (!isSpeech && runStart >= 0) {
      runs.push([runStart, f]);
      runStart = -1;
    }
  }
  if (runStart >= 0) {
    runs.push([runStart, nFrames]);
  }

  // bridge short pauses
  const maxPauseFrames = Math.round((MAX_PAUSE_S * sampleRate) / FRAME_HOP);
  const merged: Array<[number, number]> = [];
  for (const run of runs) {
    const last = merged[merged.length - 1];
    if (last !== undefined && run[0] - last[1] <= maxPauseFrames) {
      last[1] = run[1];
    } else {
      merged.push([run[0], run[1]]);
    }
  }

  const minFrames = Math.max(1, Math.round((MIN_SEGMENT_S * sampleRate - FRAME_LEN) / FRAME_HOP) + 1);
  const kept = merged.filter(([start, end]) => end - start >= minFrames);

  // greedy turn clustering on mean band distributions
  const centroids: Float64Array[] = [];
  const memberCounts: number[] = [];
  const segments: DiarSegment[] = [];
  for (const [start, end] of kept) {
    const profile = segmentProfile(features, start, end);
    let best = -1;
    let bestSim = -Infinity;
    for (let c = 0; c < centroids.length; c++) {
      const sim = cosineSimilarity(profile, centroids[c]!);
      if (sim > bestSim) {
        bestSim = sim;
        best = c;
      }
    }
    let cluster: number;
    if (best >= 0 && bestSim >= SPEAKER_SIM_THRESHOLD) {
      cluster = best;
      const centroid = centroids[cluster]!;
      const n = memberCounts[cluster]!;
      for (let i = 0; i < centroid.length; i++) {
        centroid[i] = (centroid[i]! * n + profile[i]!) / (n + 1);
      }
      memberCounts[cluster] = n + 1;
    } else {
      cluster = centroids.length;
      centroids.push(profile.slice());
      memberCounts.push(1);
    }
    const onsetSample = features.offsets[start]!;
    const endSample = features.offsets[end - 1]! + FRAME_LEN;
    segments.push({
      onsetS: onsetSample / sampleRate,
      durationS: (endSample - onsetSample) / sampleRate,
      speaker: `spk${String(cluster).padStart(2, "0")}`,
      frameStart: start,
      frameEnd: end,
    });
  }

  return { segments, features };
}

function segmentProfile(features: FrameFeatures, frameStart: number, frameEnd: number): Float64Array {
  const acc = new Float64Array(features.bandPowers[0]?.length ?? 0);
  for (let f = frameStart; f < frameEnd; f++) {
    const dist = bandDistribution(features.bandPowers[f]!);
    for (let i = 0; i < acc.length; i++) {
      acc[i] = acc[i]! + dist[i]!;
    }
  }
  const n = frameEnd - frameStart;
  for (let i = 0; i < acc.length; i++) {
    acc[i] = acc[i]! / n;
  }
  return acc;
}
