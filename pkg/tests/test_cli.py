import json
import math

import numpy as np
import pytest

from conftest import sine, white_noise
from vhfasr import cli
from vhfasr.audio_io import AudioClip, read_wav, resample, write_wav
from vhfasr.ctc import LogitsMatrix, save_logits


def make_manifest(tmp_path, n=3, rate=22050, with_noise=True, missing=()):
    audio_dir = tmp_path / "audio"
    audio_dir.mkdir(exist_ok=True)
    lines = []
    for i in range(n):
        utt_id = f"utt{i:03d}"
        path = audio_dir / f"{utt_id}.wav"
        if utt_id not in missing:
            clip = sine(300 + 40 * i, rate, duration_s=0.5, amplitude=0.3)
            if with_noise:
                noise = white_noise(len(clip), rate, rms=0.05, seed=i)
                clip = AudioClip(clip.samples + noise.samples, rate)
            write_wav(clip, path, "pcm16")
        lines.append(
            json.dumps({"id": utt_id, "audio": str(path), "text": f"Test utterance {i}!"})
        )
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def write_labels(tmp_path, symbols):
    path = tmp_path / "labels.txt"
    out = ["<blank>"]
    for s in symbols:
        out.append("<space>" if s == " " else s)
    path.write_text("\n".join(out) + "\n")
    return path


def dominant_logits(text, labels):
    """Logits whose greedy decode collapses to `text` (blank between repeats)."""
    index = {c: i for i, c in enumerate(labels)}
    frames = []
    prev = None
    for ch in text:
        if ch == prev:
            frames.append(0)
        frames.append(index[ch])
        prev = ch
    values = np.full((len(frames), len(labels)), math.log(0.02 / (len(labels) - 1)))
    for t, k in enumerate(frames):
        values[t, k] = math.log(0.98)
    values -= np.logaddexp.reduce(values, axis=1, keepdims=True)
    return LogitsMatrix(values)


class TestPreprocess:
    def test_happy_path(self, tmp_path, capsys):
        manifest = make_manifest(tmp_path, n=2)
        out_dir = tmp_path / "out"
        rc = cli.main(["preprocess", str(manifest), str(out_dir), "--quiet"])
        assert rc == 0
        produced = sorted(p.name for p in out_dir.glob("*.wav"))
        assert produced == ["utt000.wav", "utt001.wav"]
        records = [
            json.loads(l) for l in (out_dir / "manifest.jsonl").read_text().splitlines()
        ]
        assert len(records) == 2
        assert records[0]["text"] == "test utterance"  # digits stripped, lowercased
        clip = read_wav(out_dir / "utt000.wav")
        assert clip.sample_rate_hz == 16000

    def test_missing_file_partial_failure(self, tmp_path, capsys):
        manifest = make_manifest(tmp_path, n=3, missing=("utt001",))
        out_dir = tmp_path / "out"
        rc = cli.main(["preprocess", str(manifest), str(out_dir), "--quiet"])
        assert rc == 1
        err = capsys.readouterr().err
        assert "utt001" in err
        assert sorted(p.name for p in out_dir.glob("*.wav")) == ["utt000.wav", "utt002.wav"]

    def test_prop_decrease_zero_is_resample_identity(self, tmp_path):
        manifest = make_manifest(tmp_path, n=1, rate=22050)
        out_dir = tmp_path / "out"
        rc = cli.main(
            ["preprocess", str(manifest), str(out_dir), "--prop-decrease", "0", "--quiet"]
        )
        assert rc == 0
        src = read_wav(tmp_path / "audio" / "utt000.wav")
        expected = resample(src, 16000)
        got = read_wav(out_dir / "utt000.wav")
        err = np.linalg.norm(got.samples - expected.samples) / np.linalg.norm(expected.samples)
        assert err < 1e-3


class TestSplit:
    def _manifest(self, tmp_path, n):
        lines = [
            json.dumps({"id": f"u{i:03d}", "audio": f"a{i}.wav", "text": "x"})
            for i in range(n)
        ]
        p = tmp_path / "m.jsonl"
        p.write_text("\n".join(lines) + "\n")
        return p

    def test_62_entries(self, tmp_path):
        m = self._manifest(tmp_path, 62)
        out = tmp_path / "splits"
        assert cli.main(["split", str(m), str(out), "--quiet"]) == 0
        sizes = {
            name: len((out / f"{name}.jsonl").read_text().splitlines())
            for name in ("train", "validation", "test")
        }
        assert sizes == {"train": 45, "validation": 11, "test": 6}

    def test_seed_reproducible_bytes(self, tmp_path):
        m = self._manifest(tmp_path, 30)
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        cli.main(["split", str(m), str(out1), "--seed", "5", "--quiet"])
        cli.main(["split", str(m), str(out2), "--seed", "5", "--quiet"])
        for name in ("train", "validation", "test"):
            assert (out1 / f"{name}.jsonl").read_bytes() == (out2 / f"{name}.jsonl").read_bytes()

    def test_degenerate_exits_2(self, tmp_path, capsys):
        m = self._manifest(tmp_path, 1)
        assert cli.main(["split", str(m), str(tmp_path / "s"), "--quiet"]) == 2


class TestDecode:
    labels = ["<blank>", " ", "a", "b", "c"]

    def test_greedy_fixture(self, tmp_path):
        labels_file = write_labels(tmp_path, self.labels[1:])
        logits_dir = tmp_path / "logits"
        logits_dir.mkdir()
        save_logits(dominant_logits("abba c", self.labels), logits_dir / "u1.ctcl")
        out = tmp_path / "hyp.tsv"
        rc = cli.main(
            ["decode", str(logits_dir), str(out), "--labels", str(labels_file),
             "--beam", "0", "--quiet"]
        )
        assert rc == 0
        assert out.read_text() == "u1\tabba c\n"

    def test_beam_with_alpha_zero_matches_no_lm(self, tmp_path):
        from vhfasr.lm import save_arpa, train_ngram

        labels_file = write_labels(tmp_path, self.labels[1:])
        logits_dir = tmp_path / "logits"
        logits_dir.mkdir()
        rng = np.random.default_rng(0)
        for i in range(3):
            z = rng.standard_normal((12, len(self.labels)))
            save_logits(
                LogitsMatrix(z - np.logaddexp.reduce(z, axis=1, keepdims=True)),
                logits_dir / f"u{i}.ctcl",
            )
        arpa = tmp_path / "m.arpa"
        save_arpa(train_ngram(["a b", "c a"], order=2), arpa)
        out_lm, out_plain = tmp_path / "lm.tsv", tmp_path / "plain.tsv"
        cli.main(["decode", str(logits_dir), str(out_plain), "--labels", str(labels_file),
                  "--beam", "16", "--quiet"])
        cli.main(["decode", str(logits_dir), str(out_lm), "--labels", str(labels_file),
                  "--beam", "16", "--lm", str(arpa), "--alpha", "0", "--quiet"])
        assert out_lm.read_text() == out_plain.read_text()

    def test_empty_dir_warns_and_exits_zero(self, tmp_path, capsys):
        labels_file = write_labels(tmp_path, self.labels[1:])
        logits_dir = tmp_path / "empty"
        logits_dir.mkdir()
        out = tmp_path / "hyp.tsv"
        rc = cli.main(["decode", str(logits_dir), str(out), "--labels", str(labels_file)])
        assert rc == 0
        assert out.read_text() == ""
        assert "warning" in capsys.readouterr().err

    def test_sorted_by_id(self, tmp_path):
        labels_file = write_labels(tmp_path, self.labels[1:])
        logits_dir = tmp_path / "logits"
        logits_dir.mkdir()
        for utt_id, text in [("zz", "a"), ("aa", "b"), ("mm", "c")]:
            save_logits(dominant_logits(text, self.labels), logits_dir / f"{utt_id}.ctcl")
        out = tmp_path / "hyp.tsv"
        cli.main(["decode", str(logits_dir), str(out), "--labels", str(labels_file),
                  "--beam", "0", "--quiet"])
        ids = [l.split("\t")[0] for l in out.read_text().splitlines()]
        assert ids == ["aa", "mm", "zz"]


class TestScore:
    def _refs(self, tmp_path, texts):
        lines = [
            json.dumps({"id": f"u{i}", "audio": f"a{i}.wav", "text": t})
            for i, t in enumerate(texts)
        ]
        p = tmp_path / "refs.jsonl"
        p.write_text("\n".join(lines) + "\n")
        return p

    def _hyps(self, tmp_path, texts):
        p = tmp_path / "hyps.tsv"
        p.write_text("".join(f"u{i}\t{t}\n" for i, t in enumerate(texts)))
        return p

    def test_identical_scores_zero(self, tmp_path, capsys):
        refs = self._refs(tmp_path, ["alpha bravo", "charlie"])
        hyps = self._hyps(tmp_path, ["alpha bravo", "charlie"])
        rc = cli.main(["score", str(refs), str(hyps), "--quiet"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "Model | Word Error Rate (WER%)" in out
        assert "0.00" in out

    def test_fixture_wer(self, tmp_path, capsys):
        refs = self._refs(tmp_path, ["a b c"])
        hyps = self._hyps(tmp_path, ["a x y"])  # 2 errors over N=3
        rc = cli.main(["score", str(refs), str(hyps), "--model-name", "demo", "--quiet"])
        assert rc == 0
        assert "demo | 66.67" in capsys.readouterr().out

    def test_punctuation_not_counted(self, tmp_path, capsys):
        refs = self._refs(tmp_path, ["Port-Side, over."])
        hyps = self._hyps(tmp_path, ["port side over"])
        cli.main(["score", str(refs), str(hyps), "--quiet"])
        assert "0.00" in capsys.readouterr().out

    def test_missing_hypothesis_exits_2(self, tmp_path, capsys):
        refs = self._refs(tmp_path, ["a", "b"])
        hyps = self._hyps(tmp_path, ["a"])  # u1 missing
        rc = cli.main(["score", str(refs), str(hyps), "--quiet"])
        assert rc == 2
        assert "u1" in capsys.readouterr().err

    def test_unknown_hypothesis_id_exits_2(self, tmp_path, capsys):
        refs = self._refs(tmp_path, ["a"])
        hyps = tmp_path / "hyps.tsv"
        hyps.write_text("u0\ta\nu9\tb\n")
        assert cli.main(["score", str(refs), str(hyps), "--quiet"]) == 2

    def test_csv_output(self, tmp_path, capsys):
        refs = self._refs(tmp_path, ["a b c"])
        hyps = self._hyps(tmp_path, ["a b c"])
        csv_path = tmp_path / "report.csv"
        cli.main(["score", str(refs), str(hyps), "--csv", str(csv_path), "--quiet"])
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "model,wer_percent,S,D,I,N"
        assert lines[1].endswith(",0,0,0,3")


class TestLmTrain:
    def test_train_and_round_trip(self, tmp_path):
        from vhfasr.lm import load_arpa, score_sequence, train_ngram

        corpus = tmp_path / "corpus.txt"
        corpus.write_text("the ship turns\nthe ship waits\n")
        out = tmp_path / "m.arpa"
        rc = cli.main(["lm-train", str(corpus), str(out), "--order", "2", "--quiet"])
        assert rc == 0
        loaded = load_arpa(out)
        direct = train_ngram(["the ship turns", "the ship waits"], order=2)
        for words in (["the", "ship"], ["ship"], []):
            assert score_sequence(loaded, words) == pytest.approx(
                score_sequence(direct, words), abs=1e-6
            )

    def test_empty_corpus_exits_2(self, tmp_path):
        corpus = tmp_path / "corpus.txt"
        corpus.write_text("\n\n")
        assert cli.main(["lm-train", str(corpus), str(tmp_path / "m.arpa"), "--quiet"]) == 2


class TestConfigRoundTrip:
    def test_dump_config(self, tmp_path, capsys):
        m = tmp_path / "m.jsonl"
        m.write_text("")
        rc = cli.main(["split", str(m), "out", "--test-ratio", "0.25", "--dump-config"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "test-ratio=0.25" in out
        assert "seed=0" in out

    def test_config_file_supplies_defaults(self, tmp_path, capsys):
        cfg = tmp_path / "flags.cfg"
        cfg.write_text("test-ratio=0.3\nseed=9\n")
        m = tmp_path / "m.jsonl"
        m.write_text("")
        cli.main(["split", str(m), "out", "--config", str(cfg), "--dump-config"])
        out = capsys.readouterr().out
        assert "test-ratio=0.3" in out
        assert "seed=9" in out

    def test_cli_flag_beats_config(self, tmp_path, capsys):
        cfg = tmp_path / "flags.cfg"
        cfg.write_text("test-ratio=0.3\n")
        m = tmp_path / "m.jsonl"
        m.write_text("")
        cli.main(["split", str(m), "out", "--config", str(cfg),
                  "--test-ratio", "0.4", "--dump-config"])
        assert "test-ratio=0.4" in capsys.readouterr().out

    def test_dumped_config_reloads(self, tmp_path, capsys):
        m = tmp_path / "m.jsonl"
        m.write_text("")
        cli.main(["split", str(m), "out", "--test-ratio", "0.25", "--dump-config"])
        dumped = capsys.readouterr().out
        cfg = tmp_path / "round.cfg"
        cfg.write_text(
            "\n".join(
                l for l in dumped.splitlines()
                if not l.startswith(("manifest=", "out-dir=", "by-duration="))
            )
        )
        cli.main(["split", str(m), "out", "--config", str(cfg), "--dump-config"])
        assert "test-ratio=0.25" in capsys.readouterr().out


class TestJobsDeterminism:
    def test_preprocess_jobs_identical(self, tmp_path):
        manifest = make_manifest(tmp_path, n=6)
        out1, out8 = tmp_path / "j1", tmp_path / "j8"
        assert cli.main(["preprocess", str(manifest), str(out1), "--jobs", "1", "--quiet"]) == 0
        assert cli.main(["preprocess", str(manifest), str(out8), "--jobs", "8", "--quiet"]) == 0
        for p1 in sorted(out1.glob("*.wav")):
            assert p1.read_bytes() == (out8 / p1.name).read_bytes()
        # manifests identical apart from the output directory in audio paths
        m1 = (out1 / "manifest.jsonl").read_text().replace(str(out1), "OUT")
        m8 = (out8 / "manifest.jsonl").read_text().replace(str(out8), "OUT")
        assert m1 == m8

    def test_decode_jobs_identical(self, tmp_path):
        labels_file = write_labels(tmp_path, [" ", "a", "b"])
        logits_dir = tmp_path / "logits"
        logits_dir.mkdir()
        rng = np.random.default_rng(1)
        for i in range(8):
            z = rng.standard_normal((10, 4))
            save_logits(
                LogitsMatrix(z - np.logaddexp.reduce(z, axis=1, keepdims=True)),
                logits_dir / f"u{i}.ctcl",
            )
        o1, o8 = tmp_path / "h1.tsv", tmp_path / "h8.tsv"
        cli.main(["decode", str(logits_dir), str(o1), "--labels", str(labels_file),
                  "--jobs", "1", "--quiet"])
        cli.main(["decode", str(logits_dir), str(o8), "--labels", str(labels_file),
                  "--jobs", "8", "--quiet"])
        assert o1.read_bytes() == o8.read_bytes()
