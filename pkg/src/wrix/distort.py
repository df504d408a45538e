"""Query-side audio degradations: noise, bit depth, resampling, reverb.

All transforms are pure float-domain functions of AudioBuffers; nothing
here touches the archive index. Randomized steps (noise placement) take
an explicit seed so benchmark runs are reproducible.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, firwin, kaiserord, upfirdn

from .audio import AudioBuffer, gaussian_noise, read_wav
from .errors import ValidationError

GAUSSIAN_SOURCE = "gaussian"
_DIRECT_CONV_MAX_RIR = 128
_STOPBAND_DB = 65.0


def mix_noise_at_snr(
    signal: AudioBuffer, noise: AudioBuffer, snr_db: float, seed: int
) -> AudioBuffer:
    """Add noise at an exact signal-to-noise ratio.

    The noise is tiled circularly from a seed-chosen offset to the
    signal's length, then scaled so that the power ratio of signal to
    scaled noise equals ``snr_db``. Because the gain is computed from
    the actual excerpt, the post-hoc measured SNR matches the target to
    floating-point precision.
    """
    if signal.sample_rate_hz != noise.sample_rate_hz:
        raise ValidationError(
            f"sample-rate mismatch: signal {signal.sample_rate_hz} Hz, "
            f"noise {noise.sample_rate_hz} Hz"
        )
    if not np.isfinite(snr_db):
        raise ValidationError(f"invalid snr_db {snr_db!r}")
    rms_signal = signal.rms()
    if rms_signal == 0.0:
        raise ValidationError("signal is silent")
    if noise.rms() == 0.0:
        raise ValidationError("noise is silent")
    n = len(signal)
    m = len(noise)
    offset = int(np.random.default_rng(seed).integers(0, m))
    excerpt = noise.samples[(offset + np.arange(n)) % m]
    rms_excerpt = float(np.sqrt(np.mean(np.square(excerpt))))
    if rms_excerpt == 0.0:
        raise ValidationError("selected noise excerpt is silent")
    gain = (rms_signal / rms_excerpt) * 10.0 ** (-snr_db / 20.0)
    return AudioBuffer(
        sample_rate_hz=signal.sample_rate_hz,
        samples=signal.samples + gain * excerpt,
    )


def measure_snr_db(signal: AudioBuffer, noisy: AudioBuffer) -> float:
    """Post-hoc SNR of a mixed buffer against the clean signal."""
    if len(signal) != len(noisy):
        raise ValidationError("buffers differ in length")
    residual = noisy.samples - signal.samples
    p_noise = float(np.mean(np.square(residual)))
    p_signal = float(np.mean(np.square(signal.samples)))
    if p_noise == 0.0 or p_signal == 0.0:
        raise ValidationError("SNR undefined for silent signal or residual")
    return 10.0 * np.log10(p_signal / p_noise)


def quantize_bits(signal: AudioBuffer, bits: int) -> AudioBuffer:
    """Midtread uniform quantization to the given bit depth.

    Inputs are pre-clamped to [-1, 1]; with L = 2^(bits-1) - 1 positive
    levels the error bound is 1/(2L) = 1/(2^bits - 2), and quantizing
    twice equals quantizing once.
    """
    if not isinstance(bits, int) or not 2 <= bits <= 16:
        raise ValidationError(f"bit depth must be an integer in [2, 16], got {bits!r}")
    levels = 2 ** (bits - 1) - 1
    clamped = np.clip(signal.samples, -1.0, 1.0)
    quantized = np.round(clamped * levels) / levels
    return AudioBuffer(sample_rate_hz=signal.sample_rate_hz, samples=quantized)


def _antialias_filter(factor: int) -> np.ndarray:
    """Kaiser-windowed linear-phase low-pass with cutoff at 1/factor.

    The transition band is 0.1/factor wide and centred on the new
    Nyquist, keeping the passband flat to 0.95 of it while giving
    >= 60 dB stopband rejection above it.
    """
    numtaps, beta = kaiserord(_STOPBAND_DB, 0.1 / factor)
    return firwin(numtaps, 1.0 / factor, window=("kaiser", beta))


def resample_roundtrip(signal: AudioBuffer, intermediate_hz: int) -> AudioBuffer:
    """Downsample to an integer-factor intermediate rate and back.

    Decimation and interpolation share one anti-aliasing FIR (the
    interpolation pass scaled by the factor), applied via polyphase
    resampling; the composite group delay is trimmed so the output has
    exactly the input's length and rate.
    """
    if intermediate_hz <= 0 or signal.sample_rate_hz % intermediate_hz != 0:
        raise ValidationError(
            f"intermediate rate {intermediate_hz} is not an integer divisor "
            f"of {signal.sample_rate_hz}"
        )
    factor = signal.sample_rate_hz // intermediate_hz
    if factor == 1:
        return AudioBuffer(signal.sample_rate_hz, signal.samples.copy())
    taps = _antialias_filter(factor)
    low = upfirdn(taps, signal.samples, up=1, down=factor)
    restored = upfirdn(taps * factor, low, up=factor, down=1)
    delay = len(taps) - 1
    n = len(signal)
    if len(restored) < delay + n:
        restored = np.concatenate(
            [restored, np.zeros(delay + n - len(restored), dtype=np.float64)]
        )
    return AudioBuffer(
        sample_rate_hz=signal.sample_rate_hz,
        samples=restored[delay : delay + n],
    )


def convolve_rir(signal: AudioBuffer, rir: AudioBuffer) -> AudioBuffer:
    """Convolve with a room impulse response, keeping the input length.

    Short RIRs use direct convolution so a unit impulse is an exact
    identity; long ones go through FFT convolution. If reverberation
    raises the peak above the dry signal's, the output is scaled back
    down to the original peak.
    """
    if signal.sample_rate_hz != rir.sample_rate_hz:
        raise ValidationError(
            f"sample-rate mismatch: signal {signal.sample_rate_hz} Hz, "
            f"rir {rir.sample_rate_hz} Hz"
        )
    if len(rir) < 1:
        raise ValidationError("empty rir")
    if len(rir) <= _DIRECT_CONV_MAX_RIR:
        wet = np.convolve(signal.samples, rir.samples)
    else:
        wet = fftconvolve(signal.samples, rir.samples)
    wet = wet[: len(signal)]
    peak_dry = float(np.max(np.abs(signal.samples)))
    peak_wet = float(np.max(np.abs(wet)))
    if peak_wet > peak_dry and peak_wet > 0.0:
        wet = wet * (peak_dry / peak_wet)
    return AudioBuffer(sample_rate_hz=signal.sample_rate_hz, samples=wet)


@dataclass(frozen=True)
class DistortionSpec:
    """One degradation step, as serialized in distortion JSON files.

    kinds and their fields:
      noise:    source (WAV path or "gaussian"), snr_db, seed
      bitdepth: bits in [2, 16]
      resample: intermediate_hz (integer divisor of the signal rate)
      reverb:   rir (WAV path)
    """

    kind: str
    source: str | None = None
    snr_db: float | None = None
    seed: int | None = None
    bits: int | None = None
    intermediate_hz: int | None = None
    rir: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "noise":
            if not self.source:
                raise ValidationError("noise spec needs a 'source'")
            if self.snr_db is None:
                raise ValidationError("noise spec needs 'snr_db'")
            if self.seed is None:
                raise ValidationError("noise spec needs 'seed'")
        elif self.kind == "bitdepth":
            if self.bits is None:
                raise ValidationError("bitdepth spec needs 'bits'")
        elif self.kind == "resample":
            if self.intermediate_hz is None:
                raise ValidationError("resample spec needs 'intermediate_hz'")
        elif self.kind == "reverb":
            if not self.rir:
                raise ValidationError("reverb spec needs 'rir'")
        else:
            raise ValidationError(f"unknown distortion kind {self.kind!r}")

    def to_json_obj(self) -> dict:
        obj: dict = {"kind": self.kind}
        for field_name in ("source", "snr_db", "seed", "bits", "intermediate_hz", "rir"):
            value = getattr(self, field_name)
            if value is not None:
                obj[field_name] = value
        return obj


def parse_distortion_spec(text: str) -> DistortionSpec:
    """Parse a DistortionSpec from its JSON form."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid distortion JSON: {exc}") from None
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("distortion spec must be an object with a 'kind'")
    known = {"kind", "source", "snr_db", "seed", "bits", "intermediate_hz", "rir"}
    unknown = set(obj) - known
    if unknown:
        raise ValidationError(f"unknown distortion fields: {sorted(unknown)}")
    try:
        return DistortionSpec(
            kind=str(obj["kind"]),
            source=None if obj.get("source") is None else str(obj["source"]),
            snr_db=None if obj.get("snr_db") is None else float(obj["snr_db"]),
            seed=None if obj.get("seed") is None else int(obj["seed"]),
            bits=None if obj.get("bits") is None else int(obj["bits"]),
            intermediate_hz=(
                None
                if obj.get("intermediate_hz") is None
                else int(obj["intermediate_hz"])
            ),
            rir=None if obj.get("rir") is None else str(obj["rir"]),
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid distortion field: {exc}") from None


def apply_distortion(
    signal: AudioBuffer, spec: DistortionSpec, base_dir: str = "."
) -> AudioBuffer:
    """Apply one spec'd degradation; WAV sources resolve under base_dir."""
    if spec.kind == "noise":
        if spec.source == GAUSSIAN_SOURCE:
            noise = gaussian_noise(
                len(signal), signal.sample_rate_hz, seed=spec.seed or 0
            )
        else:
            noise = read_wav(os.path.join(base_dir, spec.source or ""))
        return mix_noise_at_snr(signal, noise, float(spec.snr_db or 0.0), spec.seed or 0)
    if spec.kind == "bitdepth":
        return quantize_bits(signal, int(spec.bits or 0))
    if spec.kind == "resample":
        return resample_roundtrip(signal, int(spec.intermediate_hz or 0))
    if spec.kind == "reverb":
        rir = read_wav(os.path.join(base_dir, spec.rir or ""))
        return convolve_rir(signal, rir)
    raise ValidationError(f"unknown distortion kind {spec.kind!r}")
