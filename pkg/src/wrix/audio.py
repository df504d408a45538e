"""Mono audio buffers and RIFF/WAVE file I/O.

Readers accept PCM16 and IEEE float32 WAV files, mono or stereo (stereo
is downmixed by channel mean). PCM16 samples are scaled by 1/32768 on
read; writing PCM16 clamps to [-1, 1 - 2^-15] before quantizing, so a
write/read round-trip is faithful within one quantization step.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .errors import ValidationError

PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioBuffer:
    """Mono waveform: sample rate plus a finite float sample array."""

    sample_rate_hz: int
    samples: np.ndarray

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0:
            raise ValidationError(f"invalid sample rate {self.sample_rate_hz!r}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise ValidationError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("samples contain non-finite values")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.square(self.samples))))


def read_wav(path: str) -> AudioBuffer:
    """Read a PCM16 or float32 WAV file into a mono buffer."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except ValueError as exc:
        raise ValidationError(f"unreadable WAV file {path!r}: {exc}") from None
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValidationError(
            f"unsupported WAV sample format {data.dtype} in {path!r} "
            f"(PCM16 and float32 are supported)"
        )
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    elif samples.ndim != 1:
        raise ValidationError(f"unsupported channel layout in {path!r}")
    if samples.size == 0:
        raise ValidationError(f"WAV file {path!r} has no samples")
    return AudioBuffer(sample_rate_hz=int(rate), samples=samples)


def write_wav(buffer: AudioBuffer, path: str, pcm16: bool = True) -> None:
    """Write a buffer as PCM16 (default) or IEEE float32."""
    if pcm16:
        clamped = np.clip(buffer.samples, -1.0, 1.0 - 2.0**-15)
        data = np.round(clamped * PCM16_SCALE).astype(np.int16)
    else:
        data = buffer.samples.astype(np.float32)
    wavfile.write(path, buffer.sample_rate_hz, data)


def wav_bytes(buffer: AudioBuffer, pcm16: bool = True) -> bytes:
    """Serialize a buffer to in-memory WAV bytes (test convenience)."""
    sink = io.BytesIO()
    if pcm16:
        clamped = np.clip(buffer.samples, -1.0, 1.0 - 2.0**-15)
        data = np.round(clamped * PCM16_SCALE).astype(np.int16)
    else:
        data = buffer.samples.astype(np.float32)
    wavfile.write(sink, buffer.sample_rate_hz, data)
    return sink.getvalue()


def gaussian_noise(
    n_samples: int, sample_rate_hz: int, seed: int, rms: float = 0.1
) -> AudioBuffer:
    """Seeded white-Gaussian noise buffer (the built-in noise source)."""
    if n_samples < 1:
        raise ValidationError("noise length must be >= 1 sample")
    if rms <= 0:
        raise ValidationError("noise rms must be > 0")
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal(n_samples) * rms
    return AudioBuffer(sample_rate_hz=sample_rate_hz, samples=samples)
