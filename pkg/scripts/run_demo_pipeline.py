#!/usr/bin/env python3
"""End-to-end demo on synthetic data.

Generates a small corpus of noisy sine-tone recordings with transcripts,
then drives the full CLI chain: preprocess -> split -> lm-train ->
decode -> score. Everything lands in a scratch directory (default
./demo_run) so the script is safe to re-run.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from vhfasr import cli
from vhfasr.audio_io import AudioClip, write_wav
from vhfasr.ctc import LogitsMatrix, save_logits


TRANSCRIPTS = [
    "securite securite all ships",
    "this is warnemuende traffic",
    "vessel ahead on your port side",
    "please confirm your position over",
    "we are passing the ferry now",
    "radio check channel one six",
    "anchorage is clear of traffic",
    "switching to working channel",
]


def synth_clip(rng, seed_freq):
    rate = 22050
    t = np.arange(int(rate * 1.2)) / rate
    tone = 0.25 * np.sin(2 * np.pi * seed_freq * t)
    noise = rng.normal(0.0, 0.04, tone.shape)
    return AudioClip(tone + noise, rate)


def peaky_logits(text, labels, rng):
    """Frame sequence that mostly spells out the text, with mild noise."""
    index = {c: i for i, c in enumerate(labels)}
    frames = []
    for ch in text:
        frames.append(index[ch])
        frames.append(0)  # blank between characters
    t, v = len(frames), len(labels)
    z = rng.normal(0.0, 0.3, (t, v))
    for i, k in enumerate(frames):
        z[i, k] += 6.0
    return LogitsMatrix(z - np.logaddexp.reduce(z, axis=1, keepdims=True))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_run", help="scratch directory")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    root = Path(args.out)
    audio_dir = root / "raw"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    lines = []
    for i, text in enumerate(TRANSCRIPTS):
        utt = f"demo{i:03d}"
        write_wav(synth_clip(rng, 300 + 40 * i), audio_dir / f"{utt}.wav", "pcm16")
        lines.append(json.dumps({"id": utt, "audio": str(audio_dir / f"{utt}.wav"),
                                 "text": text, "lang": "en"}))
    manifest = root / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} synthetic utterances under {audio_dir}")

    clean_dir = root / "clean"
    run(["preprocess", str(manifest), str(clean_dir), "--jobs", "4"])

    run(["split", str(clean_dir / "manifest.jsonl"), str(root / "splits"),
         "--seed", str(args.seed)])

    corpus = root / "corpus.txt"
    corpus.write_text("\n".join(TRANSCRIPTS) + "\n")
    run(["lm-train", str(corpus), str(root / "lm.arpa"), "--order", "3"])

    labels = ["<blank>", "<space>"] + sorted(set("".join(TRANSCRIPTS)) - {" "})
    labels_file = root / "labels.txt"
    labels_file.write_text("\n".join(labels) + "\n")
    label_chars = [" " if l == "<space>" else l for l in labels]

    logits_dir = root / "logits"
    logits_dir.mkdir(exist_ok=True)
    for i, text in enumerate(TRANSCRIPTS):
        save_logits(peaky_logits(text, label_chars, rng), logits_dir / f"demo{i:03d}.ctcl")

    hyp = root / "hyp.tsv"
    run(["decode", str(logits_dir), str(hyp), "--labels", str(labels_file),
         "--beam", "16", "--lm", str(root / "lm.arpa"), "--alpha", "0.5"])

    run(["score", str(clean_dir / "manifest.jsonl"), str(hyp), "--model-name", "demo"])


def run(argv):
    print(f"$ vhfasr {' '.join(argv)}")
    code = cli.main(argv)
    if code != 0:
        sys.exit(code)


if __name__ == "__main__":
    main()
