"""STFT analysis/synthesis and dB conversion.

One-sided complex spectrograms with center (reflect) padding so the
frame count is 1 + floor(n_samples / hop_length). Inversion uses
overlap-add with window-square normalization and requires a
constant-overlap-add window/hop pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vhfasr.audio_io import AudioClip

DEFAULT_FLOOR_DB = -100.0


@dataclass(frozen=True)
class StftConfig:
    n_fft: int = 1024
    hop_length: int = 256
    window: str = "hann"

    def __post_init__(self):
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise ValueError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 0 < self.hop_length <= self.n_fft:
            raise ValueError(f"hop_length must be in (0, n_fft], got {self.hop_length}")
        if self.window != "hann":
            raise ValueError(f"unsupported window: {self.window!r}")

    def window_samples(self) -> np.ndarray:
        # periodic hann; COLA with hop = n_fft/4
        n = np.arange(self.n_fft)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.n_fft)


@dataclass(frozen=True)
class Spectrogram:
    """T x (n_fft/2 + 1) one-sided complex STFT."""

    values: np.ndarray
    config: StftConfig
    source_rate_hz: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[1] != self.config.n_fft // 2 + 1:
            raise ValueError(f"bad spectrogram shape {values.shape} for n_fft={self.config.n_fft}")
        if values.size and not np.all(np.isfinite(values)):
            raise ValueError("spectrogram contains non-finite coefficients")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]


def _center_pad(x: np.ndarray, pad: int) -> np.ndarray:
    if len(x) > pad:
        return np.pad(x, pad, mode="reflect")
    # too short to reflect; zero-pad instead (deterministic fallback)
    return np.pad(x, pad, mode="constant")


def stft(clip: AudioClip, config: StftConfig = StftConfig()) -> Spectrogram:
    """Short-time Fourier transform with center padding."""
    x = clip.samples
    n_bins = config.n_fft // 2 + 1
    if len(x) == 0:
        return Spectrogram(np.zeros((0, n_bins), dtype=np.complex128), config, clip.sample_rate_hz)
    hop = config.hop_length
    n_frames = 1 + len(x) // hop
    padded = _center_pad(x, config.n_fft // 2)
    w = config.window_samples()
    idx = np.arange(config.n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = padded[idx] * w[None, :]
    return Spectrogram(np.fft.rfft(frames, axis=1), config, clip.sample_rate_hz)


def _check_cola(config: StftConfig) -> np.ndarray:
    """Return the squared-window overlap-add envelope; raise if it has holes."""
    w2 = config.window_samples() ** 2
    hop = config.hop_length
    env = np.zeros(config.n_fft)
    for shift in range(-config.n_fft, config.n_fft + 1, hop):
        lo, hi = max(0, shift), min(config.n_fft, shift + config.n_fft)
        if lo < hi:
            env[lo:hi] += w2[lo - shift : hi - shift]
    if np.min(env) < 1e-10:
        raise ValueError(
            f"window/hop pair is not constant-overlap-add (hop={hop}, n_fft={config.n_fft})"
        )
    return env


def istft(spec: Spectrogram, out_len: int) -> AudioClip:
    """Inverse STFT via overlap-add; output truncated/zero-padded to out_len."""
    _check_cola(spec.config)
    cfg = spec.config
    if spec.n_frames == 0:
        return AudioClip(np.zeros(out_len), spec.source_rate_hz)
    hop, n_fft = cfg.hop_length, cfg.n_fft
    w = cfg.window_samples()
    frames = np.fft.irfft(spec.values, n=n_fft, axis=1) * w[None, :]
    total = (spec.n_frames - 1) * hop + n_fft
    y = np.zeros(total)
    wss = np.zeros(total)
    for t in range(spec.n_frames):
        y[t * hop : t * hop + n_fft] += frames[t]
        wss[t * hop : t * hop + n_fft] += w**2
    nz = wss > 1e-10
    y[nz] /= wss[nz]
    y = y[n_fft // 2 :]  # undo center padding
    if len(y) < out_len:
        y = np.pad(y, (0, out_len - len(y)))
    return AudioClip(y[:out_len], spec.source_rate_hz)


def to_db(spec: Spectrogram, floor_db: float = DEFAULT_FLOOR_DB) -> np.ndarray:
    """20*log10 magnitude, clamped below at floor_db."""
    if floor_db >= 0:
        raise ValueError(f"floor_db must be negative, got {floor_db}")
    mag = np.abs(spec.values)
    floor_amp = 10.0 ** (floor_db / 20.0)
    return 20.0 * np.log10(np.maximum(mag, floor_amp))
