"""Binary on-disk container for archive indexes.

Layout (all integers little-endian, all vectors float32 little-endian)::

    magic    4 bytes  b"WRIX"
    version  u32      currently 1
    flags    u32      bit 0: raw segments retained
    model_id str      (u32 byte length + UTF-8)
    scheme   str      canonical scheme string, e.g. "softmax:5.0"
    dim      u32
    n_files  u32
    then per file, in file_id-ascending order:
      file_id     str
      n_profiles  u32
      per profile: speaker_label str, n_segments u32,
                   total_duration_s f64, vector dim*f32
      if flags bit 0:
        n_raw u32
        per raw segment: segment_index u32, speaker_label str,
                         onset_s f64, duration_s f64, vector dim*f32

Because in-memory indexes quantize vectors to float32 at build time,
save followed by load reproduces the index exactly.
"""

from __future__ import annotations

import struct
from typing import IO, BinaryIO

import numpy as np

from .aggregate import SpeakerProfile, WeightingScheme
from .errors import IndexFormatError
from .ingest import SegmentEmbedding, SegmentRecord
from .retrieval import ArchiveIndex, FileEntry

MAGIC = b"WRIX"
VERSION = 1
_FLAG_SEGMENTS = 1


def _write_str(stream: IO[bytes], value: str) -> None:
    data = value.encode("utf-8")
    stream.write(struct.pack("<I", len(data)))
    stream.write(data)


def _write_vector(stream: IO[bytes], vector: np.ndarray) -> None:
    stream.write(np.asarray(vector, dtype="<f4").tobytes())


def save_index(index: ArchiveIndex, stream: BinaryIO) -> None:
    """Serialize an index to a binary stream."""
    stream.write(MAGIC)
    flags = _FLAG_SEGMENTS if index.has_segments else 0
    stream.write(struct.pack("<II", VERSION, flags))
    _write_str(stream, index.model_id)
    _write_str(stream, str(index.scheme))
    stream.write(struct.pack("<II", index.dim, index.n_files))
    for file_id in index.file_ids():
        entry = index.files[file_id]
        _write_str(stream, file_id)
        stream.write(struct.pack("<I", len(entry.profiles)))
        for profile in entry.profiles:
            _write_str(stream, profile.speaker_label)
            stream.write(struct.pack("<Id", profile.n_segments, profile.total_duration_s))
            _write_vector(stream, profile.vector)
        if index.has_segments:
            segments = entry.segments or ()
            stream.write(struct.pack("<I", len(segments)))
            for emb in segments:
                seg = emb.segment
                stream.write(struct.pack("<I", seg.segment_index))
                _write_str(stream, seg.speaker_label)
                stream.write(struct.pack("<dd", seg.onset_s, seg.duration_s))
                _write_vector(stream, emb.vector)


class _Reader:
    """Bounds-checked binary cursor; any premature EOF is a format error."""

    def __init__(self, stream: BinaryIO):
        self.data = stream.read()
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IndexFormatError("truncated index file")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def string(self) -> str:
        length = self.u32()
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError:
            raise IndexFormatError("corrupt string field in index") from None

    def vector(self, dim: int) -> np.ndarray:
        raw = self.take(4 * dim)
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)

    def done(self) -> bool:
        return self.pos == len(self.data)


def load_index(stream: BinaryIO) -> ArchiveIndex:
    """Deserialize an index, verifying magic, version and completeness."""
    reader = _Reader(stream)
    if reader.take(4) != MAGIC:
        raise IndexFormatError("not an index file (bad magic)")
    version = reader.u32()
    if version != VERSION:
        raise IndexFormatError(
            f"unsupported index version {version} (reader supports {VERSION})"
        )
    flags = reader.u32()
    has_segments = bool(flags & _FLAG_SEGMENTS)
    model_id = reader.string()
    scheme = WeightingScheme.parse(reader.string())
    dim = reader.u32()
    n_files = reader.u32()
    files: dict[str, FileEntry] = {}
    for _ in range(n_files):
        file_id = reader.string()
        if file_id in files:
            raise IndexFormatError(f"duplicate file_id {file_id!r} in index")
        profiles = []
        for _ in range(reader.u32()):
            label = reader.string()
            n_segments = reader.u32()
            total_duration_s = reader.f64()
            vector = reader.vector(dim)
            profiles.append(
                SpeakerProfile(
                    file_id=file_id,
                    speaker_label=label,
                    vector=vector,
                    total_duration_s=total_duration_s,
                    n_segments=n_segments,
                    scheme=scheme,
                )
            )
        segments = None
        if has_segments:
            raw = []
            for _ in range(reader.u32()):
                segment_index = reader.u32()
                label = reader.string()
                onset_s = reader.f64()
                duration_s = reader.f64()
                vector = reader.vector(dim)
                record = SegmentRecord(
                    file_id=file_id,
                    segment_index=segment_index,
                    speaker_label=label,
                    onset_s=onset_s,
                    duration_s=duration_s,
                )
                raw.append(SegmentEmbedding(record, model_id, vector))
            segments = tuple(raw)
        files[file_id] = FileEntry(profiles=tuple(profiles), segments=segments)
    if not reader.done():
        raise IndexFormatError("trailing bytes after index payload")
    return ArchiveIndex(model_id, dim, scheme, files, has_segments=has_segments)
