/**
 * Adapter job runner: preprocess each media file to mono 16 kHz PCM16,
 * diarize, embed the diarized segments, extract person names from the
 * synopsis metadata, and emit the interchange artifacts the retrieval
 * package ingests, plus a job manifest, a provenance sidecar, and a
 * skip/error log.
 *
 * Files are processed by a bounded pool of concurrent tasks; artifact
 * content is serialized from results keyed by file id, never by
 * completion order, and log lines carry no timestamps — re-running a
 * job over unchanged inputs writes byte-identical artifacts.
 */

import { promises as fs } from "node:fs";
import * as path from "node:path";

import { DIARIZER_ID, DiarSegment, diarize } from "./diarize.js";
import { EMBEDDER_ID, EMBEDDING_DIM, MIN_SEGMENT_S, embedSegment, minFrames } from "./embed.js";
import { FrameFeatures } from "./features.js";
import {
  EmbeddingRecord,
  RttmRow,
  formatEmbeddingsJsonl,
  formatLabelsJson,
  formatManifestJsonl,
  formatRttm,
} from "./formats.js";
import { NER_ID, FileMetadata, extractLabels } from "./names.js";
import { NoAudioError, WavData, decodeWavBuffer, downmixMono, encodeWavPcm16, peakNormalize, resampleLinear } from "./wav.js";

export const ADAPTER_VERSION = "0.1.0";
export const TARGET_SAMPLE_RATE = 16000;

const AVAILABLE_EMBEDDERS: Record<string, { dim: number }> = {
  [EMBEDDER_ID]: { dim: EMBEDDING_DIM },
};

export class JobError extends Error {}

export interface AdapterJob {
  /** Media file paths (WAV containers; anything else is skipped with a logged reason). */
  media: string[];
  outDir: string;
  /** Embedding backend id; must name an available backend. */
  modelId?: string;
  /** Path to a metadata JSON object: file_id -> { synopsis: ... }. */
  metadata?: string;
  targetSampleRate?: number;
  /** Bounded concurrency for per-file work. */
  workers?: number;
}

export interface JobSummary {
  media: string[];
  out_dir: string;
  model_id: string;
  metadata: string | null;
  target_sample_rate: number;
  files_in: number;
  files_processed: number;
  files_skipped: number;
  segments: number;
  embeddings: number;
  embedding_skips: number;
  artifacts: string[];
}

interface FileResult {
  fileId: string;
  skipped: string | null;
  durationS: number;
  segments: DiarSegment[];
  embeddings: Array<{ segmentIndex: number; vector: Float64Array }>;
  logLines: string[];
  wavBytes: Buffer;
}

export async function runJob(job: AdapterJob): Promise<JobSummary> {
  const modelId = job.modelId ?? EMBEDDER_ID;
  if (!(modelId in AVAILABLE_EMBEDDERS)) {
    throw new JobError(
      `unknown embedding model ${JSON.stringify(modelId)}; available: ${Object.keys(AVAILABLE_EMBEDDERS).sort().join(", ")}`,
    );
  }
  const rate = job.targetSampleRate ?? TARGET_SAMPLE_RATE;
  if (rate !== TARGET_SAMPLE_RATE) {
    throw new JobError(`target sample rate is fixed at ${TARGET_SAMPLE_RATE} Hz, got ${rate}`);
  }
  if (job.media.length === 0) {
    throw new JobError("no media files given");
  }

  const byId = new Map<string, string>();
  for (const mediaPath of job.media) {
    const fileId = fileIdFor(mediaPath);
    const existing = byId.get(fileId);
    if (existing !== undefined && existing !== mediaPath) {
      throw new JobError(`media paths ${existing} and ${mediaPath} collide on file_id ${fileId}`);
    }
    byId.set(fileId, mediaPath);
  }

  let metadata: Record<string, FileMetadata> = {};
  if (job.metadata !== undefined) {
    metadata = await readMetadata(job.metadata);
  }

  const audioDir = path.join(job.outDir, "audio");
  await fs.mkdir(audioDir, { recursive: true });

  const fileIds = [...byId.keys()].sort();
  const workers = Math.max(1, job.workers ?? 4);
  const results = await mapPool(fileIds, workers, async (fileId) => processFile(fileId, byId.get(fileId)!, rate));

  const rttmRows: RttmRow[] = [];
  const embeddingRecords: EmbeddingRecord[] = [];
  const durations: Record<string, number> = {};
  const logLines: string[] = [];
  let skipped = 0;
  let embeddingSkips = 0;

  for (const result of results) {
    logLines.push(...result.logLines);
    if (result.skipped !== null) {
      skipped += 1;
      continue;
    }
    durations[result.fileId] = result.durationS;
    for (const seg of result.segments) {
      rttmRows.push({
        fileId: result.fileId,
        onsetS: seg.onsetS,
        durationS: seg.durationS,
        speaker: seg.speaker,
      });
    }
    for (const emb of result.embeddings) {
      const seg = result.segments[emb.segmentIndex]!;
      embeddingRecords.push({
        fileId: result.fileId,
        segmentIndex: emb.segmentIndex,
        speaker: seg.speaker,
        onsetS: seg.onsetS,
        durationS: seg.durationS,
        modelId,
        vector: emb.vector,
      });
    }
    embeddingSkips += result.segments.length - result.embeddings.length;
    await atomicWrite(path.join(audioDir, `${result.fileId}.wav`), result.wavBytes);
  }

  const processedIds = Object.keys(durations).sort();
  const labels = extractLabels(processedIds, metadata);

  const artifacts = [
    "diarisation.rttm",
    "embeddings.jsonl",
    "labels.json",
    "manifest.jsonl",
    "provenance.json",
    "adapter.log",
    "job.json",
  ];
  const summary: JobSummary = {
    media: job.media,
    out_dir: job.outDir,
    model_id: modelId,
    metadata: job.metadata ?? null,
    target_sample_rate: rate,
    files_in: job.media.length,
    files_processed: processedIds.length,
    files_skipped: skipped,
    segments: rttmRows.length,
    embeddings: embeddingRecords.length,
    embedding_skips: embeddingSkips,
    artifacts,
  };

  logLines.push(
    `job: ${summary.files_processed} file(s) processed, ${summary.files_skipped} skipped, ` +
      `${summary.segments} segment(s), ${summary.embeddings} embedding(s)`,
  );

  const provenance = {
    adapter_version: ADAPTER_VERSION,
    backends: { diarizer: DIARIZER_ID, embedder: modelId, ner: NER_ID },
    embedding_dim: AVAILABLE_EMBEDDERS[modelId]!.dim,
    embedding_min_segment_s: MIN_SEGMENT_S,
    target_sample_rate: rate,
  };

  await atomicWrite(path.join(job.outDir, "diarisation.rttm"), formatRttm(rttmRows));
  await atomicWrite(path.join(job.outDir, "embeddings.jsonl"), formatEmbeddingsJsonl(embeddingRecords));
  await atomicWrite(path.join(job.outDir, "labels.json"), formatLabelsJson(labels));
  await atomicWrite(path.join(job.outDir, "manifest.jsonl"), formatManifestJsonl(durations));
  await atomicWrite(path.join(job.outDir, "provenance.json"), JSON.stringify(provenance, null, 2) + "\n");
  await atomicWrite(path.join(job.outDir, "adapter.log"), logLines.map((l) => l + "\n").join(""));
  await atomicWrite(path.join(job.outDir, "job.json"), JSON.stringify(summary, null, 2) + "\n");

  return summary;
}

function fileIdFor(mediaPath: string): string {
  const base = path.basename(mediaPath);
  const stem = base.includes(".") ? base.slice(0, base.lastIndexOf(".")) : base;
  const fileId = stem.replace(/\s+/g, "_");
  if (fileId === "") {
    throw new JobError(`cannot derive a file_id from ${mediaPath}`);
  }
  return fileId;
}

async function readMetadata(metadataPath: string): Promise<Record<string, FileMetadata>> {
  let raw: string;
  try {
    raw = await fs.readFile(metadataPath, "utf8");
  } catch (err) {
    throw new JobError(`cannot read metadata ${metadataPath}: ${(err as Error).message}`);
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch (err) {
    throw new JobError(`metadata ${metadataPath} is not valid JSON: ${(err as Error).message}`);
  }
  if (parsed === null || typeof parsed !== "object" || Array.isArray(parsed)) {
    throw new JobError(`metadata ${metadataPath} must be a JSON object keyed by file_id`);
  }
  return parsed as Record<string, FileMetadata>;
}

async function processFile(fileId: string, mediaPath: string, rate: number): Promise<FileResult> {
  const result: FileResult = {
    fileId,
    skipped: null,
    durationS: 0,
    segments: [],
    embeddings: [],
    logLines: [],
    wavBytes: Buffer.alloc(0),
  };

  let raw: Buffer;
  try {
    raw = await fs.readFile(mediaPath);
  } catch (err) {
    result.skipped = `cannot read file: ${(err as Error).message}`;
    result.logLines.push(`${fileId}: skipped (${result.skipped})`);
    return result;
  }

  let wav: WavData;
  try {
    wav = decodeWavBuffer(raw, mediaPath);
  } catch (err) {
    if (err instanceof NoAudioError) {
      result.skipped = err.message;
      result.logLines.push(`${fileId}: skipped (${err.message})`);
      return result;
    }
    throw err;
  }

  let samples: Float64Array;
  if (wav.conformingPcm16Mono16k) {
    // pass-through: keep the original bytes, analyze what is on disk
    samples = wav.samples[0]!;
    result.wavBytes = raw;
  } else {
    const mono = downmixMono(wav);
    const resampled = resampleLinear(mono, wav.sampleRate, rate);
    const normalized = peakNormalize(resampled);
    // quantize once; analysis runs on exactly the samples written out
    const quantized = new Float64Array(normalized.length);
    const pcm = encodeWavPcm16(normalized, rate);
    for (let i = 0; i < normalized.length; i++) {
      quantized[i] = pcm.readInt16LE(44 + 2 * i) / 32768;
    }
    samples = quantized;
    result.wavBytes = pcm;
  }

  if (samples.length === 0) {
    result.skipped = "no audio samples";
    result.logLines.push(`${fileId}: skipped (no audio samples)`);
    return result;
  }

  result.durationS = samples.length / rate;

  const { segments, features } = diarize(samples, rate);
  result.segments = segments;
  if (segments.length === 0) {
    result.logLines.push(`${fileId}: no speech detected`);
  }
  result.embeddings = embedSegments(fileId, segments, features, rate, result.logLines);
  return result;
}

function embedSegments(
  fileId: string,
  segments: DiarSegment[],
  features: FrameFeatures,
  rate: number,
  logLines: string[],
): Array<{ segmentIndex: number; vector: Float64Array }> {
  const embeddings: Array<{ segmentIndex: number; vector: Float64Array }> = [];
  const threshold = minFrames(rate);
  for (let i = 0; i < segments.length; i++) {
    const seg = segments[i]!;
    if (seg.frameEnd - seg.frameStart < threshold) {
      logLines.push(
        `${fileId}: segment ${i} (${seg.durationS}s) below embedder minimum ${MIN_SEGMENT_S}s, skipped`,
      );
      continue;
    }
    embeddings.push({ segmentIndex: i, vector: embedSegment(features, seg.frameStart, seg.frameEnd) });
  }
  return embeddings;
}

async function mapPool<T, R>(items: T[], limit: number, fn: (item: T) => Promise<R>): Promise<R[]> {
  const results = new Array<R>(items.length);
  let next = 0;
  const workers = Array.from({ length: Math.min(limit, items.length) }, async () => {
    while (next < items.length) {
      const index = next;
      next += 1;
      results[index] = await fn(items[index]!);
    }
  });
  await Promise.all(workers);
  return results;
}

async function atomicWrite(target: string, content: string | Buffer): Promise<void> {
  const tmp = `${target}.tmp`;
  await fs.writeFile(tmp, content);
  await fs.rename(tmp, target);
}
