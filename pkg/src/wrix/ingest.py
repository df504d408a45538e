"""Parsing, validation and per-file statistics for the interchange inputs.

Covers the four corpus inputs: diarisation RTTM, segment-embedding JSON
Lines, synopsis-derived relevance labels, and query/archive manifests.
All parsers are strict: a malformed line raises :class:`ParseError`
citing the line number, never a silent skip.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ParseError, ValidationError

QUERY_CATEGORIES = ("AVP", "SP", "AoP")

_RTTM_MIN_FIELDS = 9


def normalize_name(name: str) -> str:
    """Canonical form of a person name used for matching: trimmed,
    internal whitespace collapsed, case-folded."""
    return " ".join(name.split()).casefold()


def display_name(name: str) -> str:
    """Trim and collapse whitespace while preserving the original casing."""
    return " ".join(name.split())


@dataclass(frozen=True)
class SegmentRecord:
    """One diarised speech segment of one archive file."""

    file_id: str
    segment_index: int
    speaker_label: str
    onset_s: float
    duration_s: float

    def __post_init__(self) -> None:
        if not self.file_id or any(c.isspace() for c in self.file_id):
            raise ValidationError(f"invalid file_id {self.file_id!r}")
        if not self.speaker_label:
            raise ValidationError("empty speaker_label")
        if self.segment_index < 0:
            raise ValidationError(f"negative segment_index {self.segment_index}")
        if not math.isfinite(self.onset_s) or self.onset_s < 0:
            raise ValidationError(f"invalid onset {self.onset_s!r}")
        if not math.isfinite(self.duration_s) or self.duration_s <= 0:
            raise ValidationError(f"non-positive duration {self.duration_s!r}")

    @property
    def key(self) -> tuple[str, int]:
        return (self.file_id, self.segment_index)


@dataclass(frozen=True)
class SegmentEmbedding:
    """Fixed-length vector for one segment plus its provenance."""

    segment: SegmentRecord
    model_id: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size < 1:
            raise ValidationError("embedding vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(vec)):
            raise ValidationError("embedding vector has non-finite components")
        if not np.any(vec != 0.0):
            raise ValidationError("embedding vector is all-zero")
        object.__setattr__(self, "vector", vec)

    @property
    def key(self) -> tuple[str, int]:
        return self.segment.key

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@dataclass(frozen=True)
class FileStats:
    """Diarisation-derived statistics for one archive file.

    ``speech_ratio_oplus`` counts overlapping speech multiply (sum of
    segment durations over video duration, in percent; may exceed 100),
    ``speech_ratio_ominus`` counts each overlapped instant once and is
    capped at 100.
    """

    file_id: str
    n_segments: int
    n_speakers: int
    video_duration_s: float
    speech_ratio_oplus: float
    speech_ratio_ominus: float

    def __post_init__(self) -> None:
        if self.video_duration_s <= 0:
            raise ValidationError("video_duration_s must be > 0")
        if self.n_speakers > self.n_segments:
            raise ValidationError("n_speakers exceeds n_segments")
        if self.speech_ratio_ominus > min(self.speech_ratio_oplus, 100.0) + 1e-9:
            raise ValidationError("speech_ratio_ominus exceeds its bounds")


@dataclass(frozen=True)
class QuerySpec:
    """One retrieval query: a person expected to speak in a given file."""

    query_id: str
    file_id: str
    person: str
    category: str

    def __post_init__(self) -> None:
        if self.category not in QUERY_CATEGORIES:
            raise ValidationError(f"unknown category {self.category!r}")


@dataclass(frozen=True)
class RelevanceLabels:
    """Per-file sets of person names derived from synopses.

    Names are stored in normalized form (see :func:`normalize_name`)
    mapped to a display form with original casing.
    """

    by_file: Mapping[str, Mapping[str, str]] = field(default_factory=dict)

    def names_for(self, file_id: str) -> frozenset[str]:
        return frozenset(self.by_file.get(file_id, {}))

    def contains(self, file_id: str, person: str) -> bool:
        return normalize_name(person) in self.by_file.get(file_id, {})

    def files_with(self, person: str) -> frozenset[str]:
        norm = normalize_name(person)
        return frozenset(f for f, names in self.by_file.items() if norm in names)

    def file_ids(self) -> frozenset[str]:
        return frozenset(self.by_file)


class EmbeddingCorpus:
    """Validated set of segment embeddings keyed by (file_id, segment_index).

    All members share one ``model_id`` and one dimensionality. Iteration
    preserves insertion (read) order so serialisation round-trips.
    """

    def __init__(self, embeddings: Iterable[SegmentEmbedding]):
        self._by_key: dict[tuple[str, int], SegmentEmbedding] = {}
        self.model_id: str | None = None
        self.dim: int | None = None
        for emb in embeddings:
            self.add(emb)

    def add(self, emb: SegmentEmbedding) -> None:
        where = f"record {emb.segment.file_id}:{emb.segment.segment_index}"
        if self.model_id is None:
            self.model_id = emb.model_id
            self.dim = emb.dim
        if emb.model_id != self.model_id:
            raise ValidationError(
                f"{where}: model_id {emb.model_id!r} does not match corpus "
                f"model_id {self.model_id!r}"
            )
        if emb.dim != self.dim:
            raise ValidationError(
                f"{where}: dimension mismatch (got {emb.dim}, expected {self.dim})"
            )
        if emb.key in self._by_key:
            raise ValidationError(f"{where}: duplicate (file_id, segment_index) key")
        self._by_key[emb.key] = emb

    def __len__(self) -> int:
        return len(self._by_key)

    def __iter__(self) -> Iterator[SegmentEmbedding]:
        return iter(self._by_key.values())

    def __contains__(self, key: tuple[str, int]) -> bool:
        return key in self._by_key

    def get(self, file_id: str, segment_index: int) -> SegmentEmbedding | None:
        return self._by_key.get((file_id, segment_index))

    def file_ids(self) -> list[str]:
        return sorted({k[0] for k in self._by_key})

    def for_file(self, file_id: str) -> list[SegmentEmbedding]:
        members = [e for e in self._by_key.values() if e.segment.file_id == file_id]
        members.sort(key=lambda e: e.segment.segment_index)
        return members


def _as_lines(text: str | Iterable[str] | IO[str]) -> Iterator[tuple[int, str]]:
    lines = text.splitlines() if isinstance(text, str) else text
    for i, line in enumerate(lines, start=1):
        yield i, line.rstrip("\n")


def parse_rttm(text: str | Iterable[str] | IO[str]) -> list[SegmentRecord]:
    """Parse diarisation RTTM into segment records.

    Lines starting with ``#`` and blank lines are ignored. Segment
    indices are assigned per file in order of appearance, starting at 0.
    """
    records: list[SegmentRecord] = []
    counters: dict[str, int] = {}
    for lineno, line in _as_lines(text):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) < _RTTM_MIN_FIELDS:
            raise ParseError(
                f"RTTM line {lineno}: expected at least {_RTTM_MIN_FIELDS} fields, "
                f"got {len(fields)}"
            )
        if fields[0] != "SPEAKER":
            raise ParseError(
                f"RTTM line {lineno}: expected SPEAKER record, got {fields[0]!r}"
            )
        file_id, speaker = fields[1], fields[7]
        try:
            onset = float(fields[3])
            duration = float(fields[4])
        except ValueError:
            raise ParseError(
                f"RTTM line {lineno}: non-numeric onset/duration "
                f"{fields[3]!r}/{fields[4]!r}"
            ) from None
        if not math.isfinite(onset) or onset < 0:
            raise ParseError(f"RTTM line {lineno}: invalid onset {fields[3]!r}")
        if not math.isfinite(duration) or duration <= 0:
            raise ParseError(f"RTTM line {lineno}: non-positive duration {fields[4]!r}")
        index = counters.get(file_id, 0)
        counters[file_id] = index + 1
        try:
            records.append(SegmentRecord(file_id, index, speaker, onset, duration))
        except ValidationError as exc:
            raise ParseError(f"RTTM line {lineno}: {exc}") from None
    return records


def format_rttm(segments: Iterable[SegmentRecord]) -> str:
    """Serialise segments back to RTTM (floats use shortest round-trip form)."""
    lines = [
        f"SPEAKER {s.file_id} 1 {s.onset_s!r} {s.duration_s!r} "
        f"<NA> <NA> {s.speaker_label} <NA> <NA>"
        for s in segments
    ]
    return "".join(line + "\n" for line in lines)


_EMBEDDING_KEYS = (
    "file_id",
    "segment_index",
    "speaker",
    "onset_s",
    "duration_s",
    "model_id",
    "vector",
)


def read_embeddings(text: str | Iterable[str] | IO[str]) -> EmbeddingCorpus:
    """Read segment embeddings from JSON Lines into a validated corpus."""
    corpus = EmbeddingCorpus([])
    for lineno, line in _as_lines(text):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"embeddings line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise ParseError(f"embeddings line {lineno}: expected a JSON object")
        missing = [k for k in _EMBEDDING_KEYS if k not in obj]
        if missing:
            raise ParseError(
                f"embeddings line {lineno}: missing keys {', '.join(missing)}"
            )
        try:
            segment = SegmentRecord(
                file_id=str(obj["file_id"]),
                segment_index=int(obj["segment_index"]),
                speaker_label=str(obj["speaker"]),
                onset_s=float(obj["onset_s"]),
                duration_s=float(obj["duration_s"]),
            )
            emb = SegmentEmbedding(
                segment=segment,
                model_id=str(obj["model_id"]),
                vector=np.asarray(obj["vector"], dtype=np.float64),
            )
            corpus.add(emb)
        except (ValidationError, TypeError) as exc:
            raise ParseError(f"embeddings line {lineno}: {exc}") from None
    return corpus


def format_embeddings(embeddings: Iterable[SegmentEmbedding]) -> str:
    """Serialise embeddings to JSON Lines, one record per segment."""
    out = []
    for e in embeddings:
        s = e.segment
        obj = {
            "file_id": s.file_id,
            "segment_index": s.segment_index,
            "speaker": s.speaker_label,
            "onset_s": s.onset_s,
            "duration_s": s.duration_s,
            "model_id": e.model_id,
            "vector": [float(x) for x in e.vector],
        }
        out.append(json.dumps(obj, separators=(",", ":")))
    return "".join(line + "\n" for line in out)


def interval_union_length(intervals: Sequence[tuple[float, float]]) -> float:
    """Total length covered by a set of (start, end) intervals.

    Endpoint sweep over intervals sorted by start; exact up to float
    rounding, O(N log N).
    """
    if not intervals:
        return 0.0
    ordered = sorted(intervals)
    total = 0.0
    cur_start, cur_end = ordered[0]
    for start, end in ordered[1:]:
        if start > cur_end:
            total += cur_end - cur_start
            cur_start, cur_end = start, end
        else:
            cur_end = max(cur_end, end)
    total += cur_end - cur_start
    return total


def compute_file_stats(
    file_id: str, segments: Sequence[SegmentRecord], video_duration_s: float
) -> FileStats:
    """Segment/speaker counts and speech ratios for one file."""
    if video_duration_s <= 0:
        raise ValidationError("video_duration_s must be > 0")
    offenders = [s.file_id for s in segments if s.file_id != file_id]
    if offenders:
        raise ValidationError(
            f"segments from {offenders[0]!r} mixed into stats for {file_id!r}"
        )
    summed = sum(s.duration_s for s in segments)
    union = interval_union_length(
        [(s.onset_s, s.onset_s + s.duration_s) for s in segments]
    )
    oplus = summed / video_duration_s * 100.0
    ominus = min(union / video_duration_s * 100.0, 100.0)
    return FileStats(
        file_id=file_id,
        n_segments=len(segments),
        n_speakers=len({s.speaker_label for s in segments}),
        video_duration_s=video_duration_s,
        speech_ratio_oplus=oplus,
        speech_ratio_ominus=min(ominus, oplus),
    )


def read_archive_manifest(text: str | Iterable[str] | IO[str]) -> dict[str, float]:
    """Read the archive manifest (JSONL of file_id + video duration)."""
    durations: dict[str, float] = {}
    for lineno, line in _as_lines(text):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"manifest line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict) or "file_id" not in obj or "video_duration_s" not in obj:
            raise ParseError(
                f"manifest line {lineno}: expected file_id and video_duration_s"
            )
        file_id = str(obj["file_id"])
        duration = float(obj["video_duration_s"])
        if file_id in durations:
            raise ParseError(f"manifest line {lineno}: duplicate file_id {file_id!r}")
        if not math.isfinite(duration) or duration <= 0:
            raise ParseError(
                f"manifest line {lineno}: non-positive video_duration_s {duration!r}"
            )
        durations[file_id] = duration
    return durations


def read_labels(
    text: str | IO[str], manifest_ids: Iterable[str] | None = None
) -> RelevanceLabels:
    """Read the labels JSON object mapping file_id to person-name lists.

    When ``manifest_ids`` is given, label keys outside the manifest raise
    and files without labels get an empty entry, so every archive file
    has a (possibly empty) name set.
    """
    raw = text if isinstance(text, str) else text.read()
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"labels: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ParseError("labels: expected a JSON object keyed by file_id")
    by_file: dict[str, dict[str, str]] = {}
    for file_id, names in obj.items():
        if not isinstance(names, list) or any(not isinstance(n, str) for n in names):
            raise ParseError(f"labels: entry for {file_id!r} must be a list of strings")
        entry: dict[str, str] = {}
        for name in names:
            norm = normalize_name(name)
            if norm and norm not in entry:
                entry[norm] = display_name(name)
        by_file[str(file_id)] = entry
    if manifest_ids is not None:
        manifest = set(manifest_ids)
        unknown = sorted(set(by_file) - manifest)
        if unknown:
            raise ValidationError(
                f"labels: file_ids absent from archive manifest: {', '.join(unknown)}"
            )
        for file_id in manifest:
            by_file.setdefault(file_id, {})
    return RelevanceLabels(by_file=by_file)


def read_query_manifest(
    text: str | Iterable[str] | IO[str], manifest_ids: Iterable[str] | None = None
) -> list[QuerySpec]:
    """Read the query manifest (JSONL of query_id/file_id/person/category)."""
    manifest = set(manifest_ids) if manifest_ids is not None else None
    queries: list[QuerySpec] = []
    seen: set[str] = set()
    for lineno, line in _as_lines(text):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"queries line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise ParseError(f"queries line {lineno}: expected a JSON object")
        missing = [k for k in ("query_id", "file_id", "person", "category") if k not in obj]
        if missing:
            raise ParseError(
                f"queries line {lineno}: missing keys {', '.join(missing)}"
            )
        try:
            query = QuerySpec(
                query_id=str(obj["query_id"]),
                file_id=str(obj["file_id"]),
                person=str(obj["person"]),
                category=str(obj["category"]),
            )
        except ValidationError as exc:
            raise ParseError(f"queries line {lineno}: {exc}") from None
        if query.query_id in seen:
            raise ParseError(f"queries line {lineno}: duplicate query_id {query.query_id!r}")
        if manifest is not None and query.file_id not in manifest:
            raise ValidationError(
                f"queries line {lineno}: file_id {query.file_id!r} absent from "
                f"archive manifest"
            )
        seen.add(query.query_id)
        queries.append(query)
    return queries


def group_segments_by_file(
    segments: Iterable[SegmentRecord],
) -> dict[str, list[SegmentRecord]]:
    grouped: dict[str, list[SegmentRecord]] = {}
    for seg in segments:
        grouped.setdefault(seg.file_id, []).append(seg)
    return grouped
