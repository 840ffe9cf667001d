"""Spectral-gating noise reduction, stationary and non-stationary.

Pipeline per clip: STFT -> dB -> noise estimate (fixed profile, or a
zero-phase IIR time-smoothed spectrogram) -> binary threshold mask ->
triangular smoothing over time and frequency -> gain applied to the
complex spectrogram -> inverse STFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d, lfilter

from vhfasr.audio_io import AudioClip
from vhfasr.spectral import Spectrogram, StftConfig, istft, stft, to_db

STATIONARY = "stationary"
NONSTATIONARY = "nonstationary"


@dataclass(frozen=True)
class GateConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    mode: str = NONSTATIONARY
    n_std_thresh: float = 1.5
    thresh_db: float = 6.0
    time_constant_s: float = 2.0
    freq_smooth_bins: int = 5
    time_smooth_frames: int = 5
    prop_decrease: float = 1.0

    def __post_init__(self):
        if self.mode not in (STATIONARY, NONSTATIONARY):
            raise ValueError(f"unknown gate mode: {self.mode!r}")
        if not 0.0 <= self.prop_decrease <= 1.0:
            raise ValueError(f"prop_decrease must be in [0, 1], got {self.prop_decrease}")
        if self.time_constant_s <= 0:
            raise ValueError(f"time_constant_s must be positive, got {self.time_constant_s}")
        for name in ("freq_smooth_bins", "time_smooth_frames"):
            v = getattr(self, name)
            if v < 1 or v % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 1, got {v}")


@dataclass(frozen=True)
class NoiseProfile:
    """Per-frequency mean/std of dB magnitude over the noise frames."""

    mean_db: np.ndarray
    std_db: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean_db, dtype=np.float64)
        std = np.asarray(self.std_db, dtype=np.float64)
        object.__setattr__(self, "mean_db", mean)
        object.__setattr__(self, "std_db", std)
        if mean.shape != std.shape:
            raise ValueError("mean_db and std_db must have equal length")
        if std.size and np.min(std) < 0:
            raise ValueError("std_db must be non-negative")


@dataclass(frozen=True)
class Mask:
    """T x F gain matrix in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.size and (np.min(values) < 0 or np.max(values) > 1):
            raise ValueError("mask entries must lie in [0, 1]")


def estimate_noise_profile(spec_db: np.ndarray, noise_frames=None) -> NoiseProfile:
    """Mean/std per frequency over the given frame range (all frames if None)."""
    spec_db = np.asarray(spec_db)
    if spec_db.shape[0] == 0:
        raise ValueError("cannot estimate a noise profile from an empty spectrogram")
    if noise_frames is not None:
        sel = spec_db[noise_frames]
        if sel.shape[0] == 0:
            raise ValueError("noise_frames selects no frames")
    else:
        sel = spec_db
    return NoiseProfile(sel.mean(axis=0), sel.std(axis=0))


def smooth_time_iir(
    spec_db: np.ndarray, time_constant_s: float, hop_length: int, sample_rate_hz: int
) -> np.ndarray:
    """Zero-phase first-order smoothing along time for each frequency channel.

    y[t] = a*y[t-1] + (1-a)*x[t] with a = exp(-hop/(sr*tau)), run forward
    then backward; each pass starts from the first value it sees.
    """
    if time_constant_s <= 0:
        raise ValueError("time_constant_s must be positive")
    spec_db = np.asarray(spec_db, dtype=np.float64)
    if spec_db.shape[0] == 0:
        return spec_db.copy()
    a = np.exp(-hop_length / (sample_rate_hz * time_constant_s))

    def one_pass(x):
        # zi = a*x[0] makes y[0] = x[0]
        zi = (a * x[:1]).astype(np.float64)
        y, _ = lfilter([1.0 - a], [1.0, -a], x, axis=0, zi=zi)
        return y

    fwd = one_pass(spec_db)
    return one_pass(fwd[::-1])[::-1]


def compute_mask(spec_db: np.ndarray, profile_or_smoothed, config: GateConfig) -> Mask:
    """Binary keep/attenuate decision per time-frequency cell (strict >)."""
    spec_db = np.asarray(spec_db)
    if config.mode == STATIONARY:
        profile: NoiseProfile = profile_or_smoothed
        if profile.mean_db.shape[0] != spec_db.shape[1]:
            raise ValueError("profile length does not match frequency axis")
        thresh = profile.mean_db + config.n_std_thresh * profile.std_db
        keep = spec_db > thresh[None, :]
    else:
        smoothed = np.asarray(profile_or_smoothed)
        if smoothed.shape != spec_db.shape:
            raise ValueError("smoothed spectrogram shape does not match input")
        keep = spec_db > smoothed + config.thresh_db
    return Mask(keep.astype(np.float64))


def _triangle(extent: int) -> np.ndarray:
    half = extent // 2
    return (half + 1 - np.abs(np.arange(extent) - half)).astype(np.float64)


def smooth_mask(mask: Mask, freq_smooth_bins: int, time_smooth_frames: int) -> Mask:
    """Separable normalized triangular smoothing; zero padding at edges."""
    for v in (freq_smooth_bins, time_smooth_frames):
        if v < 1 or v % 2 == 0:
            raise ValueError("smoothing extents must be odd and >= 1")
    if freq_smooth_bins == 1 and time_smooth_frames == 1:
        return mask
    kernel = np.outer(_triangle(time_smooth_frames), _triangle(freq_smooth_bins))
    kernel /= kernel.sum()
    out = convolve2d(mask.values, kernel, mode="same", boundary="fill")
    return Mask(np.clip(out, 0.0, 1.0))


def apply_mask_and_reconstruct(
    spec: Spectrogram, mask: Mask, prop_decrease: float, out_len: int
) -> AudioClip:
    """Attenuate masked-out cells and invert back to a waveform."""
    if mask.values.shape != spec.values.shape:
        raise ValueError("mask shape does not match spectrogram")
    gain = 1.0 - prop_decrease * (1.0 - mask.values)
    gated = Spectrogram(spec.values * gain, spec.config, spec.source_rate_hz)
    return istft(gated, out_len)


def reduce_noise(
    clip: AudioClip, config: GateConfig = GateConfig(), noise_clip: AudioClip | None = None
) -> AudioClip:
    """Full noise-gating pipeline; output length equals input length."""
    n = len(clip)
    if n == 0:
        return clip
    spec = stft(clip, config.stft)
    spec_db = to_db(spec)
    if config.mode == STATIONARY:
        if noise_clip is not None:
            noise_db = to_db(stft(noise_clip, config.stft))
        else:
            noise_db = spec_db
        estimate = estimate_noise_profile(noise_db)
    else:
        estimate = smooth_time_iir(
            spec_db, config.time_constant_s, config.stft.hop_length, clip.sample_rate_hz
        )
    mask = compute_mask(spec_db, estimate, config)
    mask = smooth_mask(mask, config.freq_smooth_bins, config.time_smooth_frames)
    return apply_mask_and_reconstruct(spec, mask, config.prop_decrease, n)
