import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rms, sine
from vhfasr.audio_io import (
    AudioClip,
    UnsupportedEncodingError,
    WavFormatError,
    read_wav,
    resample,
    write_wav,
)


def write_raw_wav(path, payload, fmt_tag, channels, rate, bits):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", fmt_tag, channels, rate, rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


class TestReadWav:
    def test_silence(self, tmp_path):
        p = tmp_path / "s.wav"
        write_wav(AudioClip(np.zeros(16000), 16000), p, "pcm16")
        clip = read_wav(p)
        assert clip.sample_rate_hz == 16000
        assert len(clip) == 16000
        assert np.all(clip.samples == 0.0)

    def test_stereo_downmix_symmetric(self, tmp_path):
        p = tmp_path / "st.wav"
        frames = np.empty(200, dtype="<i2")
        frames[0::2] = 16384  # left  = +0.5
        frames[1::2] = -16384  # right = -0.5
        write_raw_wav(p, frames.tobytes(), 1, 2, 16000, 16)
        clip = read_wav(p)
        assert len(clip) == 100
        assert np.all(clip.samples == 0.0)

    def test_pcm24(self, tmp_path):
        p = tmp_path / "p24.wav"
        vals = [2**23 - 1, -(2**23), 0]
        payload = b"".join(struct.pack("<i", v)[:3] for v in vals)
        write_raw_wav(p, payload, 1, 1, 16000, 24)
        clip = read_wav(p)
        np.testing.assert_allclose(
            clip.samples, [(2**23 - 1) / 2**23, -1.0, 0.0], atol=1e-12
        )

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_wav(tmp_path / "nope.wav")

    def test_malformed_header(self, tmp_path):
        p = tmp_path / "bad.wav"
        p.write_bytes(b"NOTARIFFFILE")
        with pytest.raises(WavFormatError):
            read_wav(p)

    def test_unsupported_codec(self, tmp_path):
        p = tmp_path / "u8.wav"
        write_raw_wav(p, bytes(100), 1, 1, 8000, 8)
        with pytest.raises(UnsupportedEncodingError):
            read_wav(p)


class TestWriteWav:
    def test_empty_clip(self, tmp_path):
        p = tmp_path / "e.wav"
        write_wav(AudioClip(np.zeros(0), 16000), p, "pcm16")
        assert len(read_wav(p)) == 0

    def test_pcm16_clipping(self, tmp_path):
        p = tmp_path / "c.wav"
        write_wav(AudioClip(np.array([1.5, -1.5]), 16000), p, "pcm16")
        raw = np.frombuffer(p.read_bytes()[-4:], dtype="<i2")
        assert raw[0] == 32767
        assert raw[1] == -32768

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_pcm16_round_trip_within_lsb(self, tmp_path_factory, seed):
        tmp = tmp_path_factory.mktemp("rt")
        gen = np.random.default_rng(seed)
        clip = AudioClip(gen.uniform(-1, 1, 500), 16000)
        p = tmp / "x.wav"
        write_wav(clip, p, "pcm16")
        back = read_wav(p)
        assert np.max(np.abs(back.samples - clip.samples)) <= 1.0 / 32768

    def test_float32_round_trip_bit_exact(self, tmp_path, rng):
        clip = AudioClip(rng.uniform(-1, 1, 500).astype("<f4").astype(np.float64), 16000)
        p = tmp_path / "f.wav"
        write_wav(clip, p, "float32")
        assert np.array_equal(read_wav(p).samples, clip.samples)


class TestResample:
    def test_identity_rate(self, rng):
        clip = AudioClip(rng.uniform(-1, 1, 1000), 16000)
        out = resample(clip, 16000)
        assert out is clip

    def test_empty(self):
        out = resample(AudioClip(np.zeros(0), 44100), 16000)
        assert len(out) == 0
        assert out.sample_rate_hz == 16000

    def test_sine_44100_to_16000(self):
        clip = sine(440, 44100)
        out = resample(clip, 16000)
        assert len(out) == 16000
        spectrum = np.abs(np.fft.rfft(out.samples))
        peak = np.argmax(spectrum)
        assert abs(peak - 440) <= 1  # 1 Hz bins over a 1 s signal
        assert abs(rms(out.samples) - rms(clip.samples)) <= 0.02 * rms(clip.samples)

    def test_output_length_rule(self, rng):
        clip = AudioClip(rng.uniform(-1, 1, 12345), 22050)
        out = resample(clip, 16000)
        assert len(out) == round(12345 * 16000 / 22050)

    def test_rate_idempotent(self, rng):
        clip = AudioClip(rng.uniform(-1, 1, 8000), 44100)
        once = resample(clip, 16000)
        twice = resample(once, 16000)
        assert np.array_equal(once.samples, twice.samples)

    def test_band_limited_energy_preserved(self):
        # content well below both Nyquist rates
        clip = sine(1000, 48000, duration_s=0.5, amplitude=0.7)
        out = resample(clip, 16000)
        e_in = np.mean(clip.samples**2)
        e_out = np.mean(out.samples**2)
        assert abs(e_out - e_in) <= 0.02 * e_in

    def test_bad_target_rate(self):
        with pytest.raises(ValueError):
            resample(AudioClip(np.zeros(10), 16000), 0)


class TestAudioClip:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            AudioClip(np.array([0.0, np.nan]), 16000)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            AudioClip(np.zeros(4), 0)
