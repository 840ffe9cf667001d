"""JSON-lines manifests and the train/validation/test split protocol.

The split shuffles with a pinned SplitMix64 generator (not the platform
RNG) so assignments are byte-identical across runs and machines. Sizes
use round-half-up: test = round(test_ratio * N), then validation =
round(val_ratio_of_train * pool) out of the remainder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from vhfasr.textnorm import NormalizationRules, normalize

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    audio_path: str
    text: str
    language_tag: str = "unknown"
    duration_s: float | None = None

    def to_json(self) -> str:
        record = {"id": self.utterance_id, "audio": self.audio_path, "text": self.text}
        if self.language_tag != "unknown":
            record["lang"] = self.language_tag
        if self.duration_s is not None:
            record["duration_s"] = self.duration_s
        return json.dumps(record, ensure_ascii=False)


@dataclass(frozen=True)
class Manifest:
    entries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        ids = [e.utterance_id for e in self.entries]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate utterance ids: {dupes}")
        for e in self.entries:
            if not e.audio_path:
                raise ValueError(f"empty audio path for id {e.utterance_id!r}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def save(self, path) -> None:
        text = "".join(e.to_json() + "\n" for e in self.entries)
        Path(path).write_text(text, encoding="utf-8", newline="\n")


@dataclass(frozen=True)
class SplitSpec:
    test_ratio: float = 0.10
    val_ratio_of_train: float = 0.20
    seed: int = 0

    def __post_init__(self):
        for name in ("test_ratio", "val_ratio_of_train"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {v}")


def load_manifest(path, normalize_text: bool = False, rules: NormalizationRules | None = None) -> Manifest:
    """Parse a JSON-lines manifest; errors carry the offending line number."""
    entries = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
        for key in ("id", "audio", "text"):
            if key not in record:
                raise ValueError(f"{path}:{lineno}: missing required field {key!r}")
        text = record["text"]
        if normalize_text:
            text = normalize(text, rules)
        entries.append(
            ManifestEntry(
                utterance_id=record["id"],
                audio_path=record["audio"],
                text=text,
                language_tag=record.get("lang", "unknown"),
                duration_s=record.get("duration_s"),
            )
        )
    return Manifest(entries)


def _splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns (output, next state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return z, state


def seeded_shuffle(n: int, seed: int) -> list[int]:
    """Deterministic Fisher-Yates permutation of range(n) driven by SplitMix64."""
    order = list(range(n))
    state = seed & _MASK64
    for i in range(n - 1, 0, -1):
        z, state = _splitmix64(state)
        j = z % (i + 1)
        order[i], order[j] = order[j], order[i]
    return order


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def split_dataset(manifest: Manifest, spec: SplitSpec, by_duration: bool = False) -> dict:
    """Partition into {"train", "validation", "test"} manifests.

    Count-based by default; with by_duration=True the ratios apply to
    total duration_s and shuffled entries are taken until each quota is
    filled.
    """
    n = len(manifest)
    if n == 0:
        raise ValueError("cannot split an empty manifest")
    order = seeded_shuffle(n, spec.seed)
    shuffled = [manifest.entries[i] for i in order]

    if by_duration:
        if any(e.duration_s is None for e in shuffled):
            raise ValueError("duration-based split requires duration_s on every entry")
        total = sum(e.duration_s for e in shuffled)
        test, rest = _take_duration(shuffled, spec.test_ratio * total)
        val_quota = spec.val_ratio_of_train * sum(e.duration_s for e in rest)
        validation, train = _take_duration(rest, val_quota)
    else:
        n_test = _round_half_up(spec.test_ratio * n)
        test, rest = shuffled[:n_test], shuffled[n_test:]
        n_val = _round_half_up(spec.val_ratio_of_train * len(rest))
        validation, train = rest[:n_val], rest[n_val:]

    splits = {"train": train, "validation": validation, "test": test}
    for name, entries in splits.items():
        if not entries:
            raise ValueError(f"degenerate split: {name} set is empty for N={n}")
    return {name: Manifest(entries) for name, entries in splits.items()}


def _take_duration(entries, quota):
    taken, rest, acc = [], [], 0.0
    for e in entries:
        if acc < quota:
            taken.append(e)
            acc += e.duration_s
        else:
            rest.append(e)
    return taken, rest
