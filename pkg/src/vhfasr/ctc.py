"""CTC loss, gradient and decoding.

Inputs are per-frame natural-log probabilities (rows log-sum-exp to 0),
class 0 is the blank. Loss and gradient use the log-domain
forward-backward recursion over the blank-interleaved label sequence;
decoding offers per-frame argmax collapse and prefix beam search with
optional word-level n-gram shallow fusion at space emissions.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LOGITS_MAGIC = b"CTCL"
LOGITS_VERSION = 1

NEG_INF = -math.inf


@dataclass(frozen=True)
class LogitsMatrix:
    """T x V natural-log probability matrix; blank is class 0."""

    values: np.ndarray
    frame_duration_s: float | None = None

    blank_index = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[1] < 2:
            raise ValueError(f"logits must be T x V with V >= 2, got shape {values.shape}")
        if values.shape[0]:
            rows = np.logaddexp.reduce(values, axis=1)
            worst = np.max(np.abs(rows))
            if not np.isfinite(worst) or worst > 1e-3:
                raise ValueError(f"rows must log-sum-exp to 0 (worst deviation {worst:.2e})")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_classes(self) -> int:
        return self.values.shape[1]


def save_logits(logp: LogitsMatrix, path) -> None:
    """Binary layout: magic, u16 version, u32 T, u32 V, T*V f32 LE row-major."""
    t, v = logp.values.shape
    with open(path, "wb") as fh:
        fh.write(LOGITS_MAGIC)
        fh.write(struct.pack("<HII", LOGITS_VERSION, t, v))
        fh.write(logp.values.astype("<f4").tobytes())


def load_logits(path) -> LogitsMatrix:
    blob = Path(path).read_bytes()
    if len(blob) < 14 or blob[:4] != LOGITS_MAGIC:
        raise ValueError(f"bad logits file magic in {path}")
    version, t, v = struct.unpack_from("<HII", blob, 4)
    if version != LOGITS_VERSION:
        raise ValueError(f"unsupported logits version {version} in {path}")
    body = blob[14:]
    if len(body) != 4 * t * v:
        raise ValueError(f"logits payload size mismatch in {path}")
    values = np.frombuffer(body, dtype="<f4").reshape(t, v).astype(np.float64)
    return _renormalized(values)


def load_text_logits(path) -> LogitsMatrix:
    """Plain-text alternative: one row per frame, space-separated log-probs."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            rows.append([float(tok) for tok in line.split()])
    if not rows:
        raise ValueError(f"empty text logits file: {path}")
    return _renormalized(np.asarray(rows, dtype=np.float64))


def _renormalized(values: np.ndarray) -> LogitsMatrix:
    # float32 storage perturbs normalization; snap rows back before validating
    if values.shape[0]:
        values = values - np.logaddexp.reduce(values, axis=1, keepdims=True)
    return LogitsMatrix(values)


def _validate_target(logp: LogitsMatrix, target) -> list[int]:
    target = list(target)
    for c in target:
        if not 1 <= c < logp.n_classes:
            raise ValueError(f"target label {c} outside [1, {logp.n_classes - 1}]")
    return target


def _min_frames(target: list[int]) -> int:
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _forward(logp: np.ndarray, ext: np.ndarray) -> np.ndarray:
    """Log-domain alpha over the blank-interleaved sequence."""
    t_max, s_max = logp.shape[0], len(ext)
    alpha = np.full((t_max, s_max), NEG_INF)
    alpha[0, 0] = logp[0, ext[0]]
    if s_max > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, t_max):
        prev = alpha[t - 1]
        stay = prev
        from_prev = np.concatenate(([NEG_INF], prev[:-1]))
        acc = np.logaddexp(stay, from_prev)
        # skip transition allowed when ext[s] is a label differing from ext[s-2]
        skip = np.concatenate(([NEG_INF, NEG_INF], prev[:-2]))
        can_skip = np.zeros(s_max, dtype=bool)
        can_skip[2:] = (ext[2:] != 0) & (ext[2:] != ext[:-2])
        acc = np.where(can_skip, np.logaddexp(acc, skip), acc)
        alpha[t] = acc + logp[t, ext]
    return alpha


def _backward(logp: np.ndarray, ext: np.ndarray) -> np.ndarray:
    t_max, s_max = logp.shape[0], len(ext)
    beta = np.full((t_max, s_max), NEG_INF)
    beta[-1, -1] = 0.0
    if s_max > 1:
        beta[-1, -2] = 0.0
    for t in range(t_max - 2, -1, -1):
        nxt = beta[t + 1] + logp[t + 1, ext]
        stay = nxt
        to_next = np.concatenate((nxt[1:], [NEG_INF]))
        acc = np.logaddexp(stay, to_next)
        skip = np.concatenate((nxt[2:], [NEG_INF, NEG_INF]))
        can_skip = np.zeros(s_max, dtype=bool)
        can_skip[:-2] = (ext[2:] != 0) & (ext[2:] != ext[:-2])
        acc = np.where(can_skip, np.logaddexp(acc, skip), acc)
        beta[t] = acc
    return beta


def _extended(target: list[int]) -> np.ndarray:
    ext = np.zeros(2 * len(target) + 1, dtype=np.int64)
    ext[1::2] = target
    return ext


def ctc_loss(logp: LogitsMatrix, target) -> float:
    """-log P(target | logp); +inf when the target cannot fit in T frames."""
    target = _validate_target(logp, target)
    t_max = logp.n_frames
    if t_max < _min_frames(target):
        return math.inf
    if not target:
        return -float(np.sum(logp.values[:, 0]))
    ext = _extended(target)
    alpha = _forward(logp.values, ext)
    total = np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    return -float(total)


def ctc_posteriors(logp: LogitsMatrix, target) -> np.ndarray:
    """gamma[t, k]: probability the path emits class k at frame t, given target."""
    target = _validate_target(logp, target)
    t_max, v = logp.values.shape
    if t_max < _min_frames(target):
        raise ValueError("target is infeasible for the given number of frames")
    if not target:
        gamma = np.zeros((t_max, v))
        gamma[:, 0] = 1.0
        return gamma
    ext = _extended(target)
    alpha = _forward(logp.values, ext)
    beta = _backward(logp.values, ext)
    log_total = np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    occ = alpha + beta - log_total  # (T, S) log occupancy
    gamma = np.zeros((t_max, v))
    for s, k in enumerate(ext):
        gamma[:, k] += np.exp(occ[:, s])
    return gamma


def ctc_grad(logp: LogitsMatrix, target) -> np.ndarray:
    """d(loss)/d(logp[t,k]) treating the log-probabilities as free variables."""
    return -ctc_posteriors(logp, target)


def ctc_grad_logits(logp: LogitsMatrix, target) -> np.ndarray:
    """Gradient through a row-wise softmax parameterization; rows sum to 0."""
    return np.exp(logp.values) - ctc_posteriors(logp, target)


def greedy_decode(logp: LogitsMatrix) -> list[int]:
    """Per-frame argmax (ties to the lowest index), collapse repeats, drop blanks."""
    out: list[int] = []
    prev = -1
    for row in logp.values:
        k = int(np.argmax(row))
        if k != prev and k != LogitsMatrix.blank_index:
            out.append(k)
        prev = k
    return out


def _words_of(prefix: tuple, labels: list[str]) -> list[str]:
    return "".join(labels[c] for c in prefix).split(" ")


def beam_decode(
    logp: LogitsMatrix,
    beam_width: int,
    lm=None,
    alpha: float = 0.0,
    beta: float = 0.0,
    labels: list[str] | None = None,
):
    """Prefix beam search; returns [(label sequence, fused score)] best first.

    Each prefix tracks blank-ending and non-blank-ending path mass.
    When a space label is emitted the preceding word is scored by the
    language model: fused += alpha * log10 P(word | context) + beta.
    The trailing partial word is scored the same way at the end, so
    fusion also applies to utterances without a final space. Ties are
    broken lexicographically on the prefix.
    """
    if beam_width < 1:
        raise ValueError(f"beam_width must be >= 1, got {beam_width}")
    use_lm = lm is not None and alpha != 0.0
    if use_lm:
        if labels is None:
            raise ValueError("labels (index-to-character mapping) required for LM fusion")
        if " " not in labels:
            raise ValueError("labels contain no space; cannot map characters to words")

    # prefix -> [logp ending in blank, logp ending in non-blank]
    beams: dict[tuple, list[float]] = {(): [0.0, NEG_INF]}
    fused: dict[tuple, float] = {(): 0.0}

    def word_bonus(prefix: tuple) -> float:
        # score the word completed by emitting a space after `prefix`
        words = _words_of(prefix, labels)
        word = words[-1]
        if not word:
            return 0.0
        context = words[:-1]
        return alpha * lm.log10_conditional(word, context) + beta

    for t in range(logp.n_frames):
        row = logp.values[t]
        nxt: dict[tuple, list[float]] = {}
        nxt_fused: dict[tuple, float] = {}

        def bump(prefix, which, value, fscore):
            cell = nxt.get(prefix)
            if cell is None:
                cell = [NEG_INF, NEG_INF]
                nxt[prefix] = cell
                nxt_fused[prefix] = fscore
            cell[which] = np.logaddexp(cell[which], value)

        for prefix, (pb, pnb) in beams.items():
            ptot = np.logaddexp(pb, pnb)
            fscore = fused[prefix]
            bump(prefix, 0, ptot + row[0], fscore)
            for c in range(1, logp.n_classes):
                pc = row[c]
                if prefix and prefix[-1] == c:
                    # repeat without separating blank stays the same prefix
                    bump(prefix, 1, pnb + pc, fscore)
                    extended = prefix + (c,)
                    ext_f = nxt_fused.get(extended)
                    if ext_f is None:
                        ext_f = fscore + (word_bonus(prefix) if use_lm and labels[c] == " " else 0.0)
                    bump(extended, 1, pb + pc, ext_f)
                else:
                    extended = prefix + (c,)
                    ext_f = nxt_fused.get(extended)
                    if ext_f is None:
                        ext_f = fscore + (word_bonus(prefix) if use_lm and labels[c] == " " else 0.0)
                    bump(extended, 1, ptot + pc, ext_f)

        ranked = sorted(
            nxt.items(),
            key=lambda kv: (-(np.logaddexp(kv[1][0], kv[1][1]) + nxt_fused[kv[0]]), kv[0]),
        )[:beam_width]
        beams = {prefix: mass for prefix, mass in ranked}
        fused = {prefix: nxt_fused[prefix] for prefix in beams}

    results = []
    for prefix, (pb, pnb) in beams.items():
        score = float(np.logaddexp(pb, pnb)) + fused[prefix]
        if use_lm:
            tail = word_bonus(prefix)
            score += tail
        results.append((list(prefix), score))
    results.sort(key=lambda item: (-item[1], tuple(item[0])))
    return results
