"""Toolkit for maritime VHF speech processing.

Covers WAV i/o and resampling, STFT analysis/synthesis, spectral-gating
noise reduction, transcript normalization, CTC loss and decoding with
optional n-gram language-model fusion, dataset splitting and WER scoring.
"""

from vhfasr.audio_io import AudioClip, read_wav, resample, write_wav
from vhfasr.metrics import corpus_wer, levenshtein_align
from vhfasr.noisegate import GateConfig, reduce_noise
from vhfasr.spectral import StftConfig, istft, stft

__all__ = [
    "AudioClip",
    "GateConfig",
    "StftConfig",
    "corpus_wer",
    "istft",
    "levenshtein_align",
    "read_wav",
    "reduce_noise",
    "resample",
    "stft",
    "write_wav",
]
