"""Transcript normalization for CTC character vocabularies.

Strips characters with no phonemic counterpart, collapses whitespace and
restores German umlauts via a word lexicon (blind ae->ä rewriting would
corrupt names and loanwords, so only listed words are rewritten).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

DEFAULT_ALLOWED_CHARS = frozenset("abcdefghijklmnopqrstuvwxyzäöüß' ")


def load_rewrite_lexicon(path) -> dict[str, str]:
    """Parse a lexicon file: `surface<TAB>replacement` per line, # comments."""
    lexicon = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected `surface<TAB>replacement`")
        lexicon[parts[0]] = parts[1]
    return lexicon


def default_rewrite_lexicon() -> dict[str, str]:
    ref = resources.files("vhfasr").joinpath("data/umlaut_lexicon.tsv")
    with resources.as_file(ref) as path:
        return load_rewrite_lexicon(path)


@dataclass(frozen=True)
class NormalizationRules:
    allowed_chars: frozenset = DEFAULT_ALLOWED_CHARS
    rewrite_lexicon: dict = field(default_factory=default_rewrite_lexicon)
    lowercase: bool = True

    def __post_init__(self):
        for surface, replacement in self.rewrite_lexicon.items():
            bad = set(replacement) - self.allowed_chars
            if bad:
                raise ValueError(
                    f"lexicon replacement {replacement!r} uses disallowed characters {bad}"
                )
            if surface == replacement:
                raise ValueError(f"lexicon entry {surface!r} maps to itself")


@dataclass(frozen=True)
class Transcript:
    utterance_id: str
    text: str
    language_tag: str = "unknown"

    def __post_init__(self):
        if not self.utterance_id:
            raise ValueError("utterance_id must be non-empty")
        if self.language_tag not in ("en", "de", "unknown"):
            raise ValueError(f"bad language_tag: {self.language_tag!r}")


def normalize(text: str, rules: NormalizationRules | None = None) -> str:
    """Lowercase, drop non-phonemic characters, collapse spaces, fix umlauts.

    Idempotent: normalize(normalize(x)) == normalize(x).
    """
    if rules is None:
        rules = NormalizationRules()
    if rules.lowercase:
        text = text.lower()
    cleaned = "".join(ch if ch in rules.allowed_chars else " " for ch in text)
    words = [rules.rewrite_lexicon.get(w, w) for w in cleaned.split()]
    return " ".join(words)


def build_charset(corpus, rules: NormalizationRules | None = None) -> list[str]:
    """CTC label alphabet: blank at index 0 then the sorted corpus characters.

    Raises if a transcript contains a character outside the allowed set,
    i.e. was not normalized first.
    """
    if rules is None:
        rules = NormalizationRules()
    chars: set[str] = set()
    for transcript in corpus:
        text = transcript.text if isinstance(transcript, Transcript) else transcript
        for ch in text:
            if ch not in rules.allowed_chars:
                raise ValueError(
                    f"unnormalized character {ch!r} in transcript; run normalize() first"
                )
            chars.add(ch)
    return ["<blank>"] + sorted(chars)
