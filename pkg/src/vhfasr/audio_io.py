"""WAV file reading/writing and band-limited resampling.

All audio is handled as mono float arrays in [-1, 1] together with a
sample rate. Multi-channel files are down-mixed by arithmetic mean on
read.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

DEFAULT_TARGET_RATE = 16_000

# Kaiser-windowed sinc resampler parameters (high-quality defaults).
_KAISER_BETA = 12.98
_ZERO_CROSSINGS = 64


class WavFormatError(ValueError):
    """Raised for a malformed RIFF/WAVE container."""


class UnsupportedEncodingError(WavFormatError):
    """Raised for a WAVE file whose codec is not PCM-16/24/32 or float-32."""


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform plus its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def _decode_pcm24(raw: bytes) -> np.ndarray:
    data = np.frombuffer(raw, dtype=np.uint8)
    n = len(data) // 3
    data = data[: n * 3].reshape(n, 3)
    # little-endian 3-byte signed integers, sign-extended into int32
    vals = (
        data[:, 0].astype(np.int32)
        | (data[:, 1].astype(np.int32) << 8)
        | (data[:, 2].astype(np.int32) << 16)
    )
    vals = np.where(vals & 0x800000, vals - 0x1000000, vals)
    return vals.astype(np.float64) / float(2**23)


def read_wav(path) -> AudioClip:
    """Read a PCM-16/24/32 or IEEE float-32 WAV file as a mono clip.

    Integer samples are scaled by the type's maximum magnitude; multiple
    channels are averaged.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such audio file: {path}")
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise WavFormatError(f"not a RIFF/WAVE file: {path}")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos : pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8 : pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise WavFormatError(f"truncated fmt chunk in {path}")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == 0xFFFE and len(body) >= 26:
                # WAVE_FORMAT_EXTENSIBLE: actual codec is in the sub-format GUID
                (sub,) = struct.unpack_from("<H", body, 24)
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)

    if fmt is None or data is None:
        raise WavFormatError(f"missing fmt/data chunk in {path}")
    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if n_channels < 1 or sample_rate <= 0:
        raise WavFormatError(f"invalid fmt chunk in {path}")

    if audio_format == 1 and bits == 16:
        x = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == 1 and bits == 24:
        x = _decode_pcm24(data)
    elif audio_format == 1 and bits == 32:
        x = np.frombuffer(data, dtype="<i4").astype(np.float64) / float(2**31)
    elif audio_format == 3 and bits == 32:
        x = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"unsupported WAV encoding (format tag {audio_format}, {bits} bit) in {path}"
        )

    n_frames = len(x) // n_channels
    x = x[: n_frames * n_channels].reshape(n_frames, n_channels).mean(axis=1)
    return AudioClip(x, sample_rate)


def write_wav(clip: AudioClip, path, encoding: str = "pcm16") -> None:
    """Write a clip as PCM-16 or IEEE float-32 WAV.

    For pcm16, samples outside [-1, 1] are clipped.
    """
    if encoding == "pcm16":
        fmt_tag, bits = 1, 16
        q = np.clip(np.round(clip.samples * 32768.0), -32768, 32767)
        payload = q.astype("<i2").tobytes()
    elif encoding == "float32":
        fmt_tag, bits = 3, 32
        payload = clip.samples.astype("<f4").tobytes()
    else:
        raise ValueError(f"unknown encoding: {encoding!r}")

    sr = clip.sample_rate_hz
    block_align = bits // 8
    fmt_chunk = struct.pack("<HHIIHH", fmt_tag, 1, sr, sr * block_align, block_align, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt_chunk)) + fmt_chunk
    body += b"data" + struct.pack("<I", len(payload)) + payload
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", len(body)) + body)


def _sinc_kernel(up: int, down: int) -> np.ndarray:
    """FIR low-pass for polyphase resampling at the upsampled rate.

    Windowed sinc with _ZERO_CROSSINGS zeros per side at the cutoff.
    resample_poly scales by `up` itself to compensate zero-insertion.
    """
    cutoff = 1.0 / max(up, down)  # fraction of the upsampled Nyquist
    half = int(np.ceil(_ZERO_CROSSINGS / cutoff))
    n = np.arange(-half, half + 1)
    h = cutoff * np.sinc(cutoff * n)
    return h * np.kaiser(2 * half + 1, _KAISER_BETA)


def resample(clip: AudioClip, target_rate_hz: int) -> AudioClip:
    """Resample with a polyphase windowed-sinc filter.

    Output length is round(n * target / source). Returns the input
    unchanged when the rates already match.
    """
    if target_rate_hz <= 0:
        raise ValueError(f"target_rate_hz must be positive, got {target_rate_hz}")
    src = clip.sample_rate_hz
    if src == target_rate_hz:
        return clip
    n_out = int(np.floor(len(clip) * target_rate_hz / src + 0.5))
    if len(clip) == 0:
        return AudioClip(np.zeros(0), target_rate_hz)
    g = gcd(src, target_rate_hz)
    up, down = target_rate_hz // g, src // g
    y = resample_poly(clip.samples, up, down, window=_sinc_kernel(up, down))
    if len(y) < n_out:
        y = np.pad(y, (0, n_out - len(y)))
    return AudioClip(y[:n_out], target_rate_hz)
