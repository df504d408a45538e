"""Archive indexing and query-to-archive ranking.

A file's score against a query embedding is the maximum cosine
similarity over its speaker profiles (speaker mode) or over its raw
segment embeddings (segment mode). Files are ranked by score descending
with a deterministic file_id-ascending tiebreak. Files without speech
score -1 so archive coverage is constant across queries.

Index vectors are stored as float32 (the on-disk precision), so an index
survives a save/load round-trip field-for-field and in-process scores
match scores computed after reloading.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .aggregate import SpeakerProfile, WeightingScheme, build_profiles
from .errors import ValidationError
from .ingest import EmbeddingCorpus, QuerySpec, SegmentEmbedding

RETRIEVAL_MODES = ("speaker", "segment")
EMPTY_FILE_SCORE = -1.0


def _f32(vector: np.ndarray) -> np.ndarray:
    """Quantize to float32 precision (kept in float64 storage)."""
    return np.asarray(vector, dtype=np.float32).astype(np.float64)


@dataclass(frozen=True)
class FileEntry:
    """Per-file index payload: speaker profiles, optionally raw segments."""

    profiles: tuple[SpeakerProfile, ...]
    segments: tuple[SegmentEmbedding, ...] | None = None


@dataclass(frozen=True)
class RankedList:
    """Ranked retrieval result for one query."""

    query_id: str
    mode: str
    entries: tuple[tuple[str, float], ...]
    excluded: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        scores = [s for _, s in self.entries]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise ValidationError("ranked scores must be non-increasing")
        if any(f in self.excluded for f, _ in self.entries):
            raise ValidationError("excluded file_id present in ranking")

    def file_ids(self) -> list[str]:
        return [f for f, _ in self.entries]


@dataclass(frozen=True)
class FusionSpec:
    """Interpolation weight for combining two systems' score maps."""

    lam: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lambda must lie in [0, 1], got {self.lam}")


class ArchiveIndex:
    """Immutable per-file store of speaker/segment embeddings.

    Built once, then safe for concurrent read-only querying: the
    similarity matrices are precomputed at construction.
    """

    def __init__(
        self,
        model_id: str,
        dim: int,
        scheme: WeightingScheme,
        files: Mapping[str, FileEntry],
        has_segments: bool,
    ):
        self.model_id = model_id
        self.dim = int(dim)
        self.scheme = scheme
        self.has_segments = bool(has_segments)
        self.files: dict[str, FileEntry] = {f: files[f] for f in sorted(files)}
        if self.dim < 1:
            raise ValidationError("index dimension must be >= 1")
        for file_id, entry in self.files.items():
            for p in entry.profiles:
                if p.vector.shape != (self.dim,):
                    raise ValidationError(
                        f"profile {file_id}/{p.speaker_label} has dim "
                        f"{p.vector.shape[0]}, index has {self.dim}"
                    )
            if self.has_segments and entry.segments is None:
                raise ValidationError(f"file {file_id!r} is missing retained segments")
            if not self.has_segments and entry.segments is not None:
                raise ValidationError("segments retained on a profile-only index")
        self._speaker_matrix, self._speaker_starts, self._speaker_counts = (
            self._stack([e.profiles for e in self.files.values()], "profile")
        )
        if self.has_segments:
            self._segment_matrix, self._segment_starts, self._segment_counts = (
                self._stack([e.segments or () for e in self.files.values()], "segment")
            )

    def _stack(self, groups, kind: str):
        vectors = []
        counts = np.zeros(len(groups), dtype=np.int64)
        for i, group in enumerate(groups):
            counts[i] = len(group)
            for item in group:
                vec = item.vector
                norm = float(np.linalg.norm(vec))
                if norm == 0.0:
                    raise ValidationError(f"zero-norm {kind} vector in index")
                vectors.append(vec / norm)
        matrix = (
            np.vstack(vectors) if vectors else np.zeros((0, self.dim), dtype=np.float64)
        )
        starts = np.concatenate(([0], np.cumsum(counts)))[:-1]
        return matrix, starts, counts

    @property
    def n_files(self) -> int:
        return len(self.files)

    def file_ids(self) -> list[str]:
        return list(self.files)

    def profiles_for(self, file_id: str) -> tuple[SpeakerProfile, ...]:
        return self._entry(file_id).profiles

    def segments_for(self, file_id: str) -> tuple[SegmentEmbedding, ...]:
        if not self.has_segments:
            raise ValidationError("index was built without segment retention")
        return self._entry(file_id).segments or ()

    def _entry(self, file_id: str) -> FileEntry:
        try:
            return self.files[file_id]
        except KeyError:
            raise ValidationError(f"unknown file_id {file_id!r}") from None


def build_index(
    corpus: EmbeddingCorpus,
    scheme: WeightingScheme,
    keep_segments: bool = False,
    file_ids: Iterable[str] | None = None,
) -> ArchiveIndex:
    """Aggregate a validated embedding corpus into an archive index.

    ``file_ids`` (typically the archive manifest) widens the file
    universe; manifest files without any embedding become speech-free
    entries that rank last. Embeddings for files outside the manifest
    are rejected.
    """
    if len(corpus) == 0 and file_ids is None:
        raise ValidationError("cannot build an index from an empty corpus")
    corpus_files = set(corpus.file_ids())
    if file_ids is not None:
        universe = set(file_ids)
        orphans = sorted(corpus_files - universe)
        if orphans:
            raise ValidationError(
                f"embeddings reference file_ids absent from the manifest: "
                f"{', '.join(orphans[:10])}"
            )
    else:
        universe = corpus_files
    files: dict[str, FileEntry] = {}
    for file_id in sorted(universe):
        members = corpus.for_file(file_id)
        profiles = tuple(
            SpeakerProfile(
                file_id=p.file_id,
                speaker_label=p.speaker_label,
                vector=_f32(p.vector),
                total_duration_s=p.total_duration_s,
                n_segments=p.n_segments,
                scheme=p.scheme,
            )
            for p in build_profiles(members, scheme)
        )
        segments = None
        if keep_segments:
            segments = tuple(
                SegmentEmbedding(e.segment, e.model_id, _f32(e.vector))
                for e in members
            )
        files[file_id] = FileEntry(profiles=profiles, segments=segments)
    model_id = corpus.model_id if corpus.model_id is not None else "empty"
    dim = corpus.dim if corpus.dim is not None else 1
    return ArchiveIndex(model_id, dim, scheme, files, has_segments=keep_segments)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValidationError("cosine similarity of a zero vector is undefined")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def query_embedding(profiles: Sequence[SpeakerProfile]) -> np.ndarray:
    """Embedding of a query file: its dominant speaker's profile vector.

    Dominance is total speaking time; ties go to the lexicographically
    smallest speaker label.
    """
    if not profiles:
        raise ValidationError("query has no speech")
    best = min(profiles, key=lambda p: (-p.total_duration_s, p.speaker_label))
    return best.vector


def _check_mode(mode: str) -> None:
    if mode not in RETRIEVAL_MODES:
        raise ValidationError(f"unknown retrieval mode {mode!r}")


def score_file(index: ArchiveIndex, q: np.ndarray, file_id: str, mode: str) -> float:
    """Max cosine over a file's profiles (speaker mode) or segments."""
    _check_mode(mode)
    if mode == "segment":
        vectors = [e.vector for e in index.segments_for(file_id)]
    else:
        vectors = [p.vector for p in index.profiles_for(file_id)]
    if not vectors:
        return EMPTY_FILE_SCORE
    return max(cosine(q, v) for v in vectors)


def score_archive(
    index: ArchiveIndex,
    q: np.ndarray,
    mode: str,
    exclude: Iterable[str] = (),
) -> dict[str, float]:
    """Score every non-excluded archive file against the query embedding."""
    _check_mode(mode)
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ValidationError(
            f"query embedding has dim {q.shape}, index has {index.dim}"
        )
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise ValidationError("cosine similarity of a zero vector is undefined")
    if mode == "segment":
        if not index.has_segments:
            raise ValidationError("index was built without segment retention")
        matrix, starts, counts = (
            index._segment_matrix,
            index._segment_starts,
            index._segment_counts,
        )
    else:
        matrix, starts, counts = (
            index._speaker_matrix,
            index._speaker_starts,
            index._speaker_counts,
        )
    # row-wise multiply+reduce, not BLAS gemv: gemv's blocked kernels can
    # give identical rows last-ulp-different sums depending on position,
    # which would make tiebreaks depend on where a file sits in the archive
    sims = (matrix * (q / norm)).sum(axis=1)
    scores = np.full(index.n_files, EMPTY_FILE_SCORE, dtype=np.float64)
    nonempty = counts > 0
    if nonempty.any():
        maxima = np.maximum.reduceat(sims, starts[nonempty])
        scores[nonempty] = np.clip(maxima, -1.0, 1.0)
    excluded = set(exclude)
    return {
        file_id: float(score)
        for file_id, score in zip(index.file_ids(), scores)
        if file_id not in excluded
    }


def rank_scores(
    scores: Mapping[str, float],
    query_id: str,
    mode: str,
    top_r: int,
    excluded: Iterable[str] = (),
) -> RankedList:
    """Order a score map descending (file_id-ascending tiebreak), truncate."""
    if top_r < 1:
        raise ValidationError(f"top_r must be >= 1, got {top_r}")
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return RankedList(
        query_id=query_id,
        mode=mode,
        entries=tuple(ordered[:top_r]),
        excluded=frozenset(excluded),
    )


def rank_archive(
    index: ArchiveIndex,
    q: np.ndarray,
    query_id: str,
    mode: str,
    top_r: int,
    exclude: Iterable[str] = (),
) -> RankedList:
    """Score the archive and return the top-R ranked list."""
    exclude = frozenset(exclude)
    scores = score_archive(index, q, mode, exclude)
    return rank_scores(scores, query_id, mode, top_r, excluded=exclude)


def rank_queries(
    index: ArchiveIndex,
    queries: Sequence[QuerySpec],
    mode: str,
    top_r: int,
    self_exclude: bool = True,
) -> tuple[dict[str, RankedList], dict[str, dict[str, float]]]:
    """Rank the archive for each query file; also return full score maps.

    Each query embeds as its file's dominant speaker profile; by default
    the query's own file is excluded from the candidates.
    """
    ranked: dict[str, RankedList] = {}
    scores: dict[str, dict[str, float]] = {}
    for query in queries:
        profiles = index.profiles_for(query.file_id)
        try:
            q = query_embedding(profiles)
        except ValidationError:
            raise ValidationError(
                f"query {query.query_id!r}: file {query.file_id!r} has no speech"
            ) from None
        exclude = frozenset({query.file_id}) if self_exclude else frozenset()
        score_map = score_archive(index, q, mode, exclude)
        ranked[query.query_id] = rank_scores(
            score_map, query.query_id, mode, top_r, excluded=exclude
        )
        scores[query.query_id] = score_map
    return ranked, scores


def fuse_scores(
    scores_a: Mapping[str, float],
    scores_b: Mapping[str, float],
    spec: FusionSpec,
) -> dict[str, float]:
    """Per-file linear interpolation of two systems' raw score maps."""
    keys_a, keys_b = set(scores_a), set(scores_b)
    if keys_a != keys_b:
        diff = sorted(keys_a.symmetric_difference(keys_b))
        shown = ", ".join(diff[:20]) + (" ..." if len(diff) > 20 else "")
        raise ValidationError(f"score maps disagree on file_ids: {shown}")
    lam = spec.lam
    return {f: lam * scores_a[f] + (1.0 - lam) * scores_b[f] for f in scores_a}


def write_ranked(ranked_lists: Iterable[RankedList], stream: IO[str]) -> None:
    """Write rankings as JSON Lines: query_id, rank, file_id, score."""
    for ranked in ranked_lists:
        for rank, (file_id, score) in enumerate(ranked.entries, start=1):
            obj = {
                "query_id": ranked.query_id,
                "rank": rank,
                "file_id": file_id,
                "score": score,
            }
            stream.write(json.dumps(obj, separators=(",", ":")) + "\n")


def read_ranked(
    text: str | Iterable[str] | IO[str], mode: str = "speaker"
) -> dict[str, RankedList]:
    """Read rankings from JSON Lines back into per-query RankedLists."""
    from .ingest import _as_lines  # shared line iterator

    rows: dict[str, list[tuple[int, str, float]]] = {}
    for lineno, line in _as_lines(text):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            rows.setdefault(str(obj["query_id"]), []).append(
                (int(obj["rank"]), str(obj["file_id"]), float(obj["score"]))
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise ValidationError(f"ranked line {lineno}: malformed row") from None
    out: dict[str, RankedList] = {}
    for query_id, entries in rows.items():
        entries.sort()
        expected = list(range(1, len(entries) + 1))
        if [r for r, _, _ in entries] != expected:
            raise ValidationError(f"query {query_id!r}: ranks are not contiguous from 1")
        out[query_id] = RankedList(
            query_id=query_id,
            mode=mode,
            entries=tuple((f, s) for _, f, s in entries),
        )
    return out


def write_scores(
    per_query_scores: Mapping[str, Mapping[str, float]], stream: IO[str]
) -> None:
    """Write full score maps (all files, not just top-R) for later fusion."""
    for query_id in per_query_scores:
        for file_id in sorted(per_query_scores[query_id]):
            obj = {
                "query_id": query_id,
                "file_id": file_id,
                "score": per_query_scores[query_id][file_id],
            }
            stream.write(json.dumps(obj, separators=(",", ":")) + "\n")


def read_scores(text: str | Iterable[str] | IO[str]) -> dict[str, dict[str, float]]:
    """Read per-query score maps written by :func:`write_scores`."""
    from .ingest import _as_lines

    out: dict[str, dict[str, float]] = {}
    for lineno, line in _as_lines(text):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            query_id = str(obj["query_id"])
            file_id = str(obj["file_id"])
            score = float(obj["score"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise ValidationError(f"scores line {lineno}: malformed row") from None
        per_query = out.setdefault(query_id, {})
        if file_id in per_query:
            raise ValidationError(
                f"scores line {lineno}: duplicate file_id {file_id!r} "
                f"for query {query_id!r}"
            )
        per_query[file_id] = score
    return out
