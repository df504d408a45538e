"""Segment-to-speaker embedding aggregation.

A speaker-level embedding is a convex combination of that speaker's
segment embeddings. Four weighting schemes are supported: uniform,
linear in segment duration, softmax over duration with temperature tau,
and duration rank. Weights for segments of other speakers are always
zero, and each speaker's weights sum to 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError
from .ingest import SegmentEmbedding, SegmentRecord

SCHEME_KINDS = ("uniform", "linear", "softmax", "rank")


@dataclass(frozen=True)
class WeightingScheme:
    """Rule mapping segment durations to aggregation weights."""

    kind: str
    tau: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in SCHEME_KINDS:
            raise ValidationError(f"unknown weighting scheme {self.kind!r}")
        if self.kind == "softmax":
            if self.tau is None or not self.tau > 0:
                raise ValidationError("softmax requires temperature tau > 0")
        elif self.tau is not None:
            raise ValidationError(f"scheme {self.kind!r} takes no temperature")

    @classmethod
    def uniform(cls) -> "WeightingScheme":
        return cls("uniform")

    @classmethod
    def linear(cls) -> "WeightingScheme":
        return cls("linear")

    @classmethod
    def softmax(cls, tau: float) -> "WeightingScheme":
        return cls("softmax", tau=float(tau))

    @classmethod
    def rank(cls) -> "WeightingScheme":
        return cls("rank")

    @classmethod
    def parse(cls, spec: str, tau: float | None = None) -> "WeightingScheme":
        """Parse ``"linear"`` or ``"softmax:5.0"`` style strings.

        An explicit ``tau`` argument supplements a bare ``"softmax"``.
        """
        text = spec.strip()
        if ":" in text:
            kind, _, tau_text = text.partition(":")
            try:
                tau = float(tau_text)
            except ValueError:
                raise ValidationError(f"invalid temperature {tau_text!r}") from None
            return cls(kind.strip(), tau=tau)
        if text == "softmax":
            if tau is None:
                raise ValidationError("softmax requires a temperature (e.g. softmax:5)")
            return cls("softmax", tau=float(tau))
        return cls(text)

    def __str__(self) -> str:
        if self.kind == "softmax":
            return f"softmax:{self.tau!r}"
        return self.kind


@dataclass(frozen=True)
class SpeakerProfile:
    """Speaker-level embedding for one diarisation-local speaker label."""

    file_id: str
    speaker_label: str
    vector: np.ndarray
    total_duration_s: float
    n_segments: int
    scheme: WeightingScheme

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector)
        if not np.all(np.isfinite(vec)):
            raise ValidationError("profile vector has non-finite components")
        if self.n_segments < 1:
            raise ValidationError("profile requires at least one segment")
        if not self.total_duration_s > 0:
            raise ValidationError("profile total duration must be > 0")
        object.__setattr__(self, "vector", vec)


def compute_weights(
    segments: Sequence[SegmentRecord],
    speaker_label: str,
    scheme: WeightingScheme,
) -> np.ndarray:
    """Weight-table row for one speaker, aligned with ``segments``.

    Entries for segments of other speakers are exactly zero; the rest are
    nonnegative and sum to 1 (exact uniform when the speaker's durations
    are all equal, so every scheme collapses to uniform in that case).
    """
    mask = np.array([s.speaker_label == speaker_label for s in segments], dtype=bool)
    n_own = int(mask.sum())
    if n_own == 0:
        raise ValidationError(f"no segment carries speaker label {speaker_label!r}")
    durations = np.array([s.duration_s for s in segments], dtype=np.float64)[mask]

    if scheme.kind == "uniform":
        raw = np.ones(n_own)
    elif scheme.kind == "linear":
        raw = durations
    elif scheme.kind == "softmax":
        raw = np.exp((durations - durations.max()) / scheme.tau)
    else:  # rank, shortest segment gets rank 1; ties use average ranks
        raw = rankdata(durations, method="average")

    if raw.min() == raw.max():
        own = np.full(n_own, 1.0 / n_own)
    else:
        own = raw / raw.sum()

    weights = np.zeros(len(segments), dtype=np.float64)
    weights[mask] = own
    return weights


def aggregate_speaker_embedding(
    segments: Sequence[SegmentRecord],
    weights: np.ndarray,
    embeddings: Mapping[tuple[str, int], SegmentEmbedding],
    scheme: WeightingScheme,
) -> SpeakerProfile:
    """Weighted sum of the positively-weighted segments' embeddings."""
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) != len(segments):
        raise ValidationError("weight row does not align with segments")
    active = [(s, w) for s, w in zip(segments, weights) if w > 0.0]
    if not active:
        raise ValidationError("weight row has no positive entries")
    labels = {s.speaker_label for s, _ in active}
    if len(labels) != 1:
        raise ValidationError("weight row mixes multiple speaker labels")
    (speaker_label,) = labels

    vector: np.ndarray | None = None
    for seg, w in active:
        emb = embeddings.get(seg.key)
        if emb is None:
            raise ValidationError(
                f"missing embedding for weighted segment "
                f"({seg.file_id}, {seg.segment_index})"
            )
        contribution = w * emb.vector
        vector = contribution if vector is None else vector + contribution
    assert vector is not None
    # duration/count cover ALL of the speaker's segments, not just the
    # positively weighted ones (softmax can underflow a weight to 0)
    own = [s for s in segments if s.speaker_label == speaker_label]
    return SpeakerProfile(
        file_id=active[0][0].file_id,
        speaker_label=speaker_label,
        vector=vector,
        total_duration_s=sum(s.duration_s for s in own),
        n_segments=len(own),
        scheme=scheme,
    )


def build_profiles(
    file_embeddings: Sequence[SegmentEmbedding], scheme: WeightingScheme
) -> list[SpeakerProfile]:
    """One profile per distinct speaker label in a file, label-ascending.

    A file with zero segments yields an empty list; archives legitimately
    contain speech-free files.
    """
    if not file_embeddings:
        return []
    file_ids = {e.segment.file_id for e in file_embeddings}
    if len(file_ids) != 1:
        raise ValidationError("build_profiles expects embeddings of a single file")
    segments = [e.segment for e in file_embeddings]
    by_key = {e.key: e for e in file_embeddings}
    profiles = []
    for label in sorted({s.speaker_label for s in segments}):
        weights = compute_weights(segments, label, scheme)
        profiles.append(aggregate_speaker_embedding(segments, weights, by_key, scheme))
    return profiles
