"""Shared builders for the test suite."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wrix import EmbeddingCorpus, SegmentEmbedding, SegmentRecord


def make_segment(file_id="f1", index=0, speaker="spk0", onset=0.0, duration=1.0):
    return SegmentRecord(
        file_id=file_id,
        segment_index=index,
        speaker_label=speaker,
        onset_s=onset,
        duration_s=duration,
    )


def make_embedding(vector, file_id="f1", index=0, speaker="spk0", duration=1.0,
                   model_id="m", onset=0.0):
    return SegmentEmbedding(
        make_segment(file_id, index, speaker, onset, duration),
        model_id,
        np.asarray(vector, dtype=float),
    )


@pytest.fixture
def tiny_corpus():
    """Three files: two speakers in f1, one in f2, f3 has no speech."""
    return EmbeddingCorpus(
        [
            make_embedding([1.0, 0.0], "f1", 0, "spk0", duration=3.0),
            make_embedding([0.8, 0.2], "f1", 1, "spk0", duration=1.0, onset=4.0),
            make_embedding([0.0, 1.0], "f1", 2, "spk1", duration=2.0, onset=6.0),
            make_embedding([0.0, 1.0], "f2", 0, "spk0", duration=5.0),
        ]
    )
