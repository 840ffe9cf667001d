"""Backoff word n-gram language model with interpolated absolute discounting.

Probabilities are stored log10, ARPA style: a seen n-gram carries its
interpolated probability, an unseen one backs off through the context's
backoff weight. The unigram distribution interpolates with a uniform
distribution over the vocabulary, so <unk> absorbs part of the
discounted mass and every conditional sums to one.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

DEFAULT_ORDER = 3
DEFAULT_DISCOUNT = 0.75


@dataclass
class NGramModel:
    order: int
    # full n-gram tuple -> log10 conditional probability
    probs: dict = field(default_factory=dict)
    # context tuple -> log10 backoff weight
    backoffs: dict = field(default_factory=dict)
    vocab: set = field(default_factory=set)

    def _lookup(self, ngram: tuple) -> float:
        if len(ngram) == 1:
            return self.probs[ngram]  # every vocab word has a unigram entry
        if ngram in self.probs:
            return self.probs[ngram]
        bow = self.backoffs.get(ngram[:-1], 0.0)
        return bow + self._lookup(ngram[1:])

    def log10_conditional(self, word: str, context) -> float:
        """log10 P(word | context); OOV words map to <unk>."""
        if word not in self.vocab:
            word = UNK
        context = [w if w in self.vocab or w == BOS else UNK for w in context]
        context = ([BOS] + list(context))[-(self.order - 1) :] if self.order > 1 else []
        ngram = tuple(context) + (word,)
        # shorten until the context has been seen
        while len(ngram) > 1 and ngram not in self.probs and ngram[:-1] not in self.backoffs:
            ngram = ngram[1:]
        return self._lookup(ngram)


def _sentences_to_tokens(corpus):
    for sentence in corpus:
        if isinstance(sentence, str):
            tokens = sentence.split()
        else:
            tokens = list(sentence)
        yield tokens


def train_ngram(
    corpus, order: int = DEFAULT_ORDER, discount: float = DEFAULT_DISCOUNT
) -> NGramModel:
    """Estimate an n-gram model by interpolated absolute discounting.

    p_k(w|ctx) = max(c - d, 0)/c(ctx) + d * N1+(ctx)/c(ctx) * p_{k-1}(w|ctx')
    with the unigram level interpolating against uniform over the
    vocabulary (words + </s> + <unk>).
    """
    if not 0.0 < discount < 1.0:
        raise ValueError(f"discount must be in (0, 1), got {discount}")
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    sentences = list(_sentences_to_tokens(corpus))
    if not any(sentences):
        raise ValueError("training corpus is empty")

    counts: list[Counter] = [Counter() for _ in range(order + 1)]
    for tokens in sentences:
        padded = [BOS] * (order - 1) + tokens + [EOS]
        start = order - 1
        for i in range(start, len(padded)):
            for k in range(1, order + 1):
                if i - k + 1 < 0:
                    continue
                counts[k][tuple(padded[i - k + 1 : i + 1])] += 1

    words = {w for tokens in sentences for w in tokens}
    pred_vocab = sorted(words | {EOS, UNK})
    v = len(pred_vocab)

    # unigram level
    total = sum(counts[1].values())
    seen_types = len(counts[1])
    uni = {}
    for w in pred_vocab:
        c = counts[1].get((w,), 0)
        uni[w] = max(c - discount, 0.0) / total + discount * seen_types / total / v

    model = NGramModel(order=order, vocab=set(pred_vocab) | {BOS})
    for w, p in uni.items():
        model.probs[(w,)] = math.log10(p)
    model.probs[(BOS,)] = -99.0  # never predicted; ARPA convention

    prev_level = {(w,): p for w, p in uni.items()}
    for k in range(2, order + 1):
        ctx_totals: Counter = Counter()
        ctx_types: Counter = Counter()
        by_ctx: defaultdict = defaultdict(list)
        for ngram, c in counts[k].items():
            ctx = ngram[:-1]
            ctx_totals[ctx] += c
            ctx_types[ctx] += 1
            by_ctx[ctx].append((ngram[-1], c))
        level = {}
        for ctx, items in by_ctx.items():
            c_ctx = ctx_totals[ctx]
            lam = discount * ctx_types[ctx] / c_ctx
            model.backoffs[ctx] = math.log10(lam)
            for w, c in items:
                lower = prev_level.get(ctx[1:] + (w,))
                if lower is None:
                    lower = uni.get(w if w in uni else UNK)
                p = max(c - discount, 0.0) / c_ctx + lam * lower
                level[ctx + (w,)] = p
                model.probs[ctx + (w,)] = math.log10(p)
        prev_level = level
    return model


def score_sequence(model: NGramModel, words) -> float:
    """log10 P(words </s> | <s> padding), backing off as needed."""
    words = list(words)
    history: list[str] = []
    total = 0.0
    for w in words + [EOS]:
        total += model.log10_conditional(w, history)
        history.append(w)
    return total


def save_arpa(model: NGramModel, path) -> None:
    """Standard ARPA text layout, UTF-8, LF line endings, tab-separated."""
    by_order: list[list[tuple]] = [[] for _ in range(model.order + 1)]
    for ngram in model.probs:
        by_order[len(ngram)].append(ngram)
    if not by_order[1]:
        raise ValueError("cannot save a model with an empty vocabulary")
    lines = ["\\data\\"]
    for k in range(1, model.order + 1):
        lines.append(f"ngram {k}={len(by_order[k])}")
    for k in range(1, model.order + 1):
        lines.append("")
        lines.append(f"\\{k}-grams:")
        for ngram in sorted(by_order[k]):
            fields = [f"{model.probs[ngram]:.7f}", " ".join(ngram)]
            if k < model.order and ngram in model.backoffs:
                fields.append(f"{model.backoffs[ngram]:.7f}")
            lines.append("\t".join(fields))
    lines += ["", "\\end\\", ""]
    Path(path).write_text("\n".join(lines), encoding="utf-8", newline="\n")


def load_arpa(path) -> NGramModel:
    text = Path(path).read_text(encoding="utf-8")
    lines = iter(text.splitlines())
    for line in lines:
        if line.strip() == "\\data\\":
            break
    else:
        raise ValueError(f"missing \\data\\ header in {path}")
    declared: dict[int, int] = {}
    for line in lines:
        line = line.strip()
        if not line:
            break
        if not line.startswith("ngram "):
            raise ValueError(f"bad count line in {path}: {line!r}")
        spec_part = line[len("ngram ") :]
        k_str, n_str = spec_part.split("=")
        declared[int(k_str)] = int(n_str)
    if not declared:
        raise ValueError(f"no ngram counts declared in {path}")
    order = max(declared)
    model = NGramModel(order=order)
    seen: dict[int, int] = {k: 0 for k in declared}
    current = None
    for line in lines:
        line = line.strip("\n").strip()
        if not line:
            continue
        if line == "\\end\\":
            break
        if line.startswith("\\") and line.endswith("-grams:"):
            current = int(line[1:].split("-")[0])
            if current not in declared:
                raise ValueError(f"undeclared section \\{current}-grams: in {path}")
            continue
        if current is None:
            raise ValueError(f"entry outside any n-gram section in {path}: {line!r}")
        parts = line.split("\t")
        if len(parts) == 1:  # tolerate space-separated files
            parts = line.split()
            ngram = tuple(parts[1 : 1 + current])
            rest = parts[1 + current :]
        else:
            ngram = tuple(parts[1].split())
            rest = parts[2:]
        if len(ngram) != current:
            raise ValueError(f"wrong n-gram length in {path}: {line!r}")
        model.probs[ngram] = float(parts[0])
        if rest:
            model.backoffs[ngram] = float(rest[0])
        seen[current] += 1
    for k, n in declared.items():
        if seen[k] != n:
            raise ValueError(f"declared {n} {k}-grams but found {seen[k]} in {path}")
    model.vocab = {ng[0] for ng in model.probs if len(ng) == 1}
    return model
