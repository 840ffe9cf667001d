"""Command-line pipeline: preprocess, split, decode, score, lm-train.

Exit codes: 0 success, 1 at least one per-file failure, 2 invalid
input/usage. All subcommands are deterministic given their flags and
seed; --jobs only changes wall time, never output bytes.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from vhfasr import audio_io, ctc, lm, metrics, noisegate, textnorm
from vhfasr.dataset import Manifest, ManifestEntry, SplitSpec, load_manifest, split_dataset
from vhfasr.spectral import StftConfig


def _log(args, message):
    if not args.quiet:
        print(message, file=sys.stderr)


def parse_labels(path) -> list[str]:
    """Label file: one symbol per line; `<blank>` and `<space>` are special."""
    labels = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if raw == "<blank>":
            labels.append("<blank>")
        elif raw == "<space>":
            labels.append(" ")
        else:
            labels.append(raw)
    if not labels or labels[0] != "<blank>":
        raise ValueError(f"first label in {path} must be <blank>")
    return labels


def _gate_config(args) -> noisegate.GateConfig:
    return noisegate.GateConfig(
        stft=StftConfig(n_fft=args.n_fft, hop_length=args.hop),
        mode=args.mode,
        n_std_thresh=args.n_std_thresh,
        thresh_db=args.thresh_db,
        time_constant_s=args.time_constant,
        freq_smooth_bins=args.freq_smooth,
        time_smooth_frames=args.time_smooth,
        prop_decrease=args.prop_decrease,
    )


def cmd_preprocess(args) -> int:
    manifest = load_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 2
    config = _gate_config(args)
    rules = textnorm.NormalizationRules()

    def process(entry: ManifestEntry):
        clip = audio_io.read_wav(entry.audio_path)
        clip = audio_io.resample(clip, args.target_rate)
        clip = noisegate.reduce_noise(clip, config)
        out_path = out_dir / f"{entry.utterance_id}.wav"
        audio_io.write_wav(clip, out_path, encoding="pcm16")
        return ManifestEntry(
            utterance_id=entry.utterance_id,
            audio_path=str(out_path),
            text=textnorm.normalize(entry.text, rules),
            language_tag=entry.language_tag,
            duration_s=clip.duration_s,
        )

    results: list = [None] * len(manifest)
    failures = []
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = {pool.submit(process, e): i for i, e in enumerate(manifest)}
        for future, i in futures.items():
            try:
                results[i] = future.result()
            except Exception as exc:
                failures.append((manifest.entries[i], exc))

    for entry, exc in failures:
        print(f"error: {entry.utterance_id} ({entry.audio_path}): {exc}", file=sys.stderr)
    Manifest([r for r in results if r is not None]).save(out_dir / "manifest.jsonl")
    _log(args, f"processed {len(manifest) - len(failures)}/{len(manifest)} files -> {out_dir}")
    return 1 if failures else 0


def cmd_split(args) -> int:
    manifest = load_manifest(args.manifest)
    spec = SplitSpec(test_ratio=args.test_ratio, val_ratio_of_train=args.val_ratio, seed=args.seed)
    try:
        splits = split_dataset(manifest, spec, by_duration=args.by_duration)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in splits.items():
        part.save(out_dir / f"{name}.jsonl")
        _log(args, f"{name}: {len(part)} entries")
    return 0


def cmd_decode(args) -> int:
    logits_dir = Path(args.logits_dir)
    pattern = "*.txt" if args.text_logits else "*.ctcl"
    files = sorted(logits_dir.glob(pattern))
    labels = parse_labels(args.labels)
    model = lm.load_arpa(args.lm) if args.lm else None
    if not files:
        _log(args, f"warning: no {pattern} files in {logits_dir}")
        Path(args.out).write_text("")
        return 0

    def decode_one(path: Path):
        logp = ctc.load_text_logits(path) if args.text_logits else ctc.load_logits(path)
        if args.beam == 0:
            indices = ctc.greedy_decode(logp)
        else:
            hyps = ctc.beam_decode(
                logp, args.beam, lm=model, alpha=args.alpha, beta=args.beta, labels=labels
            )
            indices = hyps[0][0]
        text = "".join(labels[i] for i in indices)
        return path.stem, text

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(decode_one, files))
    rows.sort(key=lambda r: r[0])
    out = "".join(f"{utt_id}\t{text}\n" for utt_id, text in rows)
    Path(args.out).write_text(out, encoding="utf-8", newline="\n")
    _log(args, f"decoded {len(rows)} utterances -> {args.out}")
    return 0


def cmd_score(args) -> int:
    refs = load_manifest(args.refs, normalize_text=True)
    ref_by_id = {e.utterance_id: e.text for e in refs}
    hyps = {}
    for raw in Path(args.hyps).read_text(encoding="utf-8").splitlines():
        if not raw:
            continue
        utt_id, _, text = raw.partition("\t")
        hyps[utt_id] = textnorm.normalize(text)
    for utt_id in sorted(hyps):
        if utt_id not in ref_by_id:
            print(f"error: hypothesis id {utt_id!r} not present in references", file=sys.stderr)
            return 2
    for utt_id in sorted(ref_by_id):
        if utt_id not in hyps:
            print(f"error: missing hypothesis for id {utt_id!r}", file=sys.stderr)
            return 2

    pairs = [(ref_by_id[i], hyps[i]) for i in sorted(ref_by_id)]
    wer, ops = metrics.corpus_wer(pairs)
    print("Model | Word Error Rate (WER%)")
    print(f"{args.model_name} | {100.0 * wer:.2f}")
    if args.per_utt:
        for utt_id in sorted(ref_by_id):
            u_wer, _ = metrics.corpus_wer([(ref_by_id[utt_id], hyps[utt_id])])
            print(f"  {utt_id}: {100.0 * u_wer:.2f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "wer_percent", "S", "D", "I", "N"])
            writer.writerow(
                [
                    args.model_name,
                    f"{100.0 * wer:.2f}",
                    ops.substitutions,
                    ops.deletions,
                    ops.insertions,
                    ops.ref_len,
                ]
            )
    return 0


def cmd_lm_train(args) -> int:
    sentences = [
        line.strip() for line in Path(args.corpus).read_text(encoding="utf-8").splitlines()
    ]
    sentences = [s for s in sentences if s]
    if not sentences:
        print("error: training corpus is empty", file=sys.stderr)
        return 2
    model = lm.train_ngram(sentences, order=args.order, discount=args.discount)
    lm.save_arpa(model, args.out)
    _log(args, f"trained order-{args.order} model on {len(sentences)} sentences -> {args.out}")
    return 0


def _add_global_flags(sub):
    sub.add_argument("--seed", type=int, default=0, help="seed for any randomized step")
    sub.add_argument("--jobs", type=int, default=1, help="parallel workers")
    sub.add_argument("--quiet", action="store_true", help="suppress progress messages")
    sub.add_argument("--config", default=None, help="flat key=value file with flag defaults")
    sub.add_argument(
        "--dump-config", action="store_true", help="print the resolved flags and exit"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vhfasr")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("preprocess", help="resample + noise-gate audio, normalize transcripts")
    p.add_argument("manifest")
    p.add_argument("out_dir")
    p.add_argument("--target-rate", type=int, default=audio_io.DEFAULT_TARGET_RATE)
    p.add_argument("--mode", choices=[noisegate.STATIONARY, noisegate.NONSTATIONARY],
                   default=noisegate.NONSTATIONARY)
    p.add_argument("--n-std-thresh", type=float, default=1.5)
    p.add_argument("--thresh-db", type=float, default=6.0)
    p.add_argument("--time-constant", type=float, default=2.0)
    p.add_argument("--freq-smooth", type=int, default=5)
    p.add_argument("--time-smooth", type=int, default=5)
    p.add_argument("--prop-decrease", type=float, default=1.0)
    p.add_argument("--n-fft", type=int, default=1024)
    p.add_argument("--hop", type=int, default=256)
    p.set_defaults(func=cmd_preprocess)
    _add_global_flags(p)

    p = subs.add_parser("split", help="train/validation/test split of a manifest")
    p.add_argument("manifest")
    p.add_argument("out_dir")
    p.add_argument("--test-ratio", type=float, default=0.10)
    p.add_argument("--val-ratio", type=float, default=0.20)
    p.add_argument("--by-duration", action="store_true")
    p.set_defaults(func=cmd_split)
    _add_global_flags(p)

    p = subs.add_parser("decode", help="CTC-decode logits files to a hypothesis TSV")
    p.add_argument("logits_dir")
    p.add_argument("out")
    p.add_argument("--labels", required=True, help="label file, one symbol per line")
    p.add_argument("--beam", type=int, default=16, help="beam width; 0 for greedy")
    p.add_argument("--lm", default=None, help="ARPA language model for shallow fusion")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--text-logits", action="store_true")
    p.set_defaults(func=cmd_decode)
    _add_global_flags(p)

    p = subs.add_parser("score", help="WER report from references and hypotheses")
    p.add_argument("refs", help="reference manifest (JSON lines)")
    p.add_argument("hyps", help="hypothesis TSV (id<TAB>text)")
    p.add_argument("--model-name", default="model")
    p.add_argument("--per-utt", action="store_true")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_score)
    _add_global_flags(p)

    p = subs.add_parser("lm-train", help="train a backoff n-gram model, save as ARPA")
    p.add_argument("corpus", help="text corpus, one sentence per line")
    p.add_argument("out", help="output ARPA path")
    p.add_argument("--order", type=int, default=lm.DEFAULT_ORDER)
    p.add_argument("--discount", type=float, default=lm.DEFAULT_DISCOUNT)
    p.set_defaults(func=cmd_lm_train)
    _add_global_flags(p)

    return parser


_SKIP_DUMP = {"func", "command", "config", "dump_config"}


def load_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _apply_config(parser, args, config_path, argv):
    """Overlay config values on args; flags given explicitly on argv win."""
    raw = load_config_file(config_path)
    by_dest = {a.dest: a for a in parser._actions}
    for key, value in raw.items():
        dest = key.replace("-", "_")
        action = by_dest.get(dest)
        if action is None or not action.option_strings:
            raise SystemExit(f"error: unknown config key {key!r}")
        if any(opt in argv for opt in action.option_strings):
            continue
        if isinstance(action, argparse._StoreTrueAction):
            setattr(args, dest, value.lower() in ("1", "true", "yes"))
        elif action.type is not None:
            setattr(args, dest, action.type(value))
        else:
            setattr(args, dest, value)


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = _subparsers(parser)[args.command]
        _apply_config(sub, args, args.config, argv)
    if args.dump_config:
        for key in sorted(vars(args)):
            if key not in _SKIP_DUMP:
                value = getattr(args, key)
                print(f"{key.replace('_', '-')}={'' if value is None else value}")
        return 0
    return args.func(args)


def _subparsers(parser) -> dict:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


if __name__ == "__main__":
    sys.exit(main())
