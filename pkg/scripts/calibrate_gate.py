#!/usr/bin/env python3
"""Sweep noise-gate settings on a synthetic tone-in-noise mixture.

Prints the SNR improvement for a grid of threshold and smoothing
settings, which is handy when picking defaults for a new recording
condition.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from vhfasr.audio_io import AudioClip
from vhfasr.noisegate import GateConfig, reduce_noise


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--snr-db", type=float, default=0.0, help="input SNR of the mixture")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rate = 16000
    t = np.arange(rate * 2) / rate
    clean = 0.3 * np.sin(2 * np.pi * 440 * t)
    rng = np.random.default_rng(args.seed)
    noise_rms = np.sqrt(np.mean(clean**2)) * 10 ** (-args.snr_db / 20)
    noise = rng.normal(0.0, noise_rms, clean.shape)
    profile = AudioClip(rng.normal(0.0, noise_rms, rate), rate)
    mix = AudioClip(clean + noise, rate)

    def snr(sig):
        err = sig - clean
        return 10 * np.log10(np.sum(clean**2) / np.sum(err**2))

    base = snr(mix.samples)
    print(f"input SNR {base:.2f} dB")
    print("n_std  smooth  prop   SNR gain (dB)")
    for n_std in (1.0, 1.5, 2.0, 2.5):
        for extent in (1, 3, 5):
            for prop in (0.8, 1.0):
                cfg = GateConfig(
                    mode="stationary",
                    n_std_thresh=n_std,
                    freq_smooth_bins=extent,
                    time_smooth_frames=extent,
                    prop_decrease=prop,
                )
                out = reduce_noise(mix, cfg, noise_clip=profile)
                print(f"{n_std:5.1f}  {extent:6d}  {prop:4.1f}   {snr(out.samples) - base:8.2f}")


if __name__ == "__main__":
    main()
