"""Deterministic synthetic archives for end-to-end testing.

Builds a desk-scale archive with known ground truth: unit-norm speaker
centroids with pairwise cosine below 0.5, segment embeddings sampled as
centroid + sigma * isotropic noise, synopsis labels naming each file's
speakers, and one single-speaker query file per speaker. Every speaker
also appears in at least five non-query files, so P@K is well defined
up to K = 5 and a low-noise archive retrieves perfectly.

Everything is a pure function of (n_speakers, n_files, dim, sigma,
seed); the same arguments reproduce the same archive byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ingest import (
    QuerySpec,
    RelevanceLabels,
    SegmentEmbedding,
    SegmentRecord,
    normalize_name,
)

MIN_NONQUERY_APPEARANCES = 5
MODEL_ID = "synthetic-v1"
_DURATION_RANGE_S = (0.2, 241.0)


@dataclass(frozen=True)
class SyntheticArchive:
    """Complete synthetic corpus plus its ground-truth centroids."""

    segments: tuple[SegmentRecord, ...]
    embeddings: tuple[SegmentEmbedding, ...]
    labels: RelevanceLabels
    queries: tuple[QuerySpec, ...]
    video_durations: dict[str, float]
    centroids: np.ndarray

    def file_ids(self) -> list[str]:
        return sorted(self.video_durations)


def _draw_centroids(
    n_speakers: int, dim: int, rng: np.random.Generator
) -> np.ndarray:
    """Unit vectors with pairwise cosine < 0.5, by rejection sampling."""
    centroids = np.zeros((n_speakers, dim), dtype=np.float64)
    accepted = 0
    attempts = 0
    limit = 20_000 * n_speakers
    while accepted < n_speakers:
        attempts += 1
        if attempts > limit:
            raise ValidationError(
                f"cannot place {n_speakers} centroids with pairwise cosine "
                f"< 0.5 in dimension {dim}"
            )
        vec = rng.standard_normal(dim)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            continue
        vec /= norm
        if accepted and np.max(centroids[:accepted] @ vec) >= 0.5:
            continue
        centroids[accepted] = vec
        accepted += 1
    return centroids


def _plan_memberships(
    n_speakers: int, n_files: int, rng: np.random.Generator
) -> list[list[int]]:
    """Speaker sets per file: query files first, then 1-3 random speakers.

    A deterministic top-up pass then guarantees each speaker at least
    MIN_NONQUERY_APPEARANCES appearances outside their query file.
    """
    memberships: list[list[int]] = [[i] for i in range(n_speakers)]
    for _ in range(n_files - n_speakers):
        count = int(rng.integers(1, 4))
        chosen = rng.choice(n_speakers, size=min(count, n_speakers), replace=False)
        memberships.append(sorted(int(s) for s in chosen))
    counts = [0] * n_speakers
    for speakers in memberships[n_speakers:]:
        for s in speakers:
            counts[s] += 1
    for speaker in range(n_speakers):
        deficit = MIN_NONQUERY_APPEARANCES - counts[speaker]
        if deficit <= 0:
            continue
        for file_idx in range(n_speakers, n_files):
            if deficit == 0:
                break
            if speaker in memberships[file_idx]:
                continue
            memberships[file_idx].append(speaker)
            memberships[file_idx].sort()
            deficit -= 1
        if deficit > 0:
            raise ValidationError(
                "not enough non-query files to give every speaker "
                f"{MIN_NONQUERY_APPEARANCES} appearances"
            )
    return memberships


def generate_synthetic_archive(
    n_speakers: int,
    n_files: int,
    dim: int,
    noise_sigma: float,
    seed: int,
) -> SyntheticArchive:
    """Build the synthetic archive (see module docstring)."""
    if n_speakers < 2:
        raise ValidationError("need at least 2 speakers")
    if n_files < n_speakers + MIN_NONQUERY_APPEARANCES:
        raise ValidationError(
            f"need at least n_speakers + {MIN_NONQUERY_APPEARANCES} files, "
            f"got {n_files} for {n_speakers} speakers"
        )
    if dim < 2:
        raise ValidationError("dimension must be >= 2")
    if noise_sigma < 0 or not np.isfinite(noise_sigma):
        raise ValidationError(f"invalid noise sigma {noise_sigma!r}")
    rng = np.random.default_rng(seed)
    centroids = _draw_centroids(n_speakers, dim, rng)
    memberships = _plan_memberships(n_speakers, n_files, rng)
    file_width = max(4, len(str(n_files)))
    spk_width = max(3, len(str(n_speakers)))
    file_ids = [f"f{i + 1:0{file_width}d}" for i in range(n_files)]
    person_names = [f"Person {i + 1:0{spk_width}d}" for i in range(n_speakers)]
    speaker_labels = [f"spk{i + 1:0{spk_width}d}" for i in range(n_speakers)]

    segments: list[SegmentRecord] = []
    embeddings: list[SegmentEmbedding] = []
    video_durations: dict[str, float] = {}
    lo, hi = np.log(_DURATION_RANGE_S[0]), np.log(_DURATION_RANGE_S[1])
    for file_idx, speakers in enumerate(memberships):
        file_id = file_ids[file_idx]
        cursor = float(rng.uniform(0.0, 5.0))
        segment_index = 0
        for speaker in speakers:
            n_seg = int(rng.integers(1, 5))
            for _ in range(n_seg):
                duration = float(np.exp(rng.uniform(lo, hi)))
                record = SegmentRecord(
                    file_id=file_id,
                    segment_index=segment_index,
                    speaker_label=speaker_labels[speaker],
                    onset_s=round(cursor, 3),
                    duration_s=round(duration, 3),
                )
                vector = centroids[speaker] + noise_sigma * rng.standard_normal(dim)
                if not np.any(vector != 0.0):
                    vector = centroids[speaker].copy()
                segments.append(record)
                embeddings.append(SegmentEmbedding(record, MODEL_ID, vector))
                segment_index += 1
                cursor = record.onset_s + record.duration_s + float(
                    rng.uniform(0.2, 2.0)
                )
        video_durations[file_id] = round(cursor + float(rng.uniform(5.0, 30.0)), 3)

    by_file: dict[str, dict[str, str]] = {}
    for file_idx, speakers in enumerate(memberships):
        names = {normalize_name(person_names[s]): person_names[s] for s in speakers}
        by_file[file_ids[file_idx]] = names
    labels = RelevanceLabels(by_file=by_file)

    queries = tuple(
        QuerySpec(
            query_id=f"q{i + 1:0{spk_width}d}",
            file_id=file_ids[i],
            person=person_names[i],
            category="AVP" if i % 2 == 0 else "AoP",
        )
        for i in range(n_speakers)
    )
    return SyntheticArchive(
        segments=tuple(segments),
        embeddings=tuple(embeddings),
        labels=labels,
        queries=queries,
        video_durations=video_durations,
        centroids=centroids,
    )
