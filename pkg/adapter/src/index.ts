export { decodeWav, decodeWavBuffer, downmixMono, encodeWavPcm16, peakNormalize, resampleLinear, NoAudioError } from "./wav.js";
export type { WavData } from "./wav.js";
export { diarize, DIARIZER_ID } from "./diarize.js";
export type { DiarResult, DiarSegment } from "./diarize.js";
export { embedSegment, minFrames, EMBEDDER_ID, EMBEDDING_DIM, MIN_SEGMENT_S } from "./embed.js";
export { extractLabels, extractPersonNames, normalizeText, stripHtml, NER_ID } from "./names.js";
export type { FileMetadata } from "./names.js";
export { formatEmbeddingsJsonl, formatLabelsJson, formatManifestJsonl, formatRttm } from "./formats.js";
export type { EmbeddingRecord, RttmRow } from "./formats.js";
export { runJob, JobError, ADAPTER_VERSION, TARGET_SAMPLE_RATE } from "./job.js";
export type { AdapterJob, JobSummary } from "./job.js";
