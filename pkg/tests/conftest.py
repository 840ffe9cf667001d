import numpy as np
import pytest

from vhfasr.audio_io import AudioClip


def sine(freq_hz, rate_hz, duration_s=1.0, amplitude=1.0):
    t = np.arange(int(round(rate_hz * duration_s))) / rate_hz
    return AudioClip(amplitude * np.sin(2.0 * np.pi * freq_hz * t), rate_hz)


def white_noise(n, rate_hz, rms, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x *= rms / np.sqrt(np.mean(x**2))
    return AudioClip(x, rate_hz)


def rms(x):
    return np.sqrt(np.mean(np.asarray(x) ** 2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
