/**
 * Canonical serialization of the interchange artifacts.
 *
 * Output ordering is fully determined by (file_id, onset) so a re-run
 * over the same inputs is byte-identical regardless of worker
 * scheduling. Numbers render through JavaScript's shortest round-trip
 * formatting, which every consumer-side float parser accepts.
 */

export interface RttmRow {
  fileId: string;
  onsetS: number;
  durationS: number;
  speaker: string;
}

export interface EmbeddingRecord {
  fileId: string;
  segmentIndex: number;
  speaker: string;
  onsetS: number;
  durationS: number;
  modelId: string;
  vector: Float64Array;
}

export function formatRttm(rows: RttmRow[]): string {
  return rows
    .map(
      (r) =>
        `SPEAKER ${r.fileId} 1 ${r.onsetS} ${r.durationS} <NA> <NA> ${r.speaker} <NA> <NA>\n`,
    )
    .join("");
}

export function formatEmbeddingsJsonl(records: EmbeddingRecord[]): string {
  return records
    .map((r) =>
      JSON.stringify({
        file_id: r.fileId,
        segment_index: r.segmentIndex,
        speaker: r.speaker,
        onset_s: r.onsetS,
        duration_s: r.durationS,
        model_id: r.modelId,
        vector: Array.from(r.vector),
      }),
    )
    .map((line) => line + "\n")
    .join("");
}

export function formatLabelsJson(labels: Record<string, string[]>): string {
  const sorted: Record<string, string[]> = {};
  for (const fileId of Object.keys(labels).sort()) {
    sorted[fileId] = labels[fileId]!;
  }
  return JSON.stringify(sorted, null, 2) + "\n";
}

export function formatManifestJsonl(durations: Record<string, number>): string {
  return Object.keys(durations)
    .sort()
    .map((fileId) => JSON.stringify({ file_id: fileId, video_duration_s: durations[fileId] }) + "\n")
    .join("");
}
