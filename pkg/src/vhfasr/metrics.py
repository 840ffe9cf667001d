"""Word-level Levenshtein alignment and word error rate.

WER = (S + D + I) / N over the whole corpus (micro-average: errors and
reference lengths are summed before dividing).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class EditOps:
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    hits: int = 0
    ref_len: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def __add__(self, other: "EditOps") -> "EditOps":
        return EditOps(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.hits + other.hits,
            self.ref_len + other.ref_len,
        )


@dataclass(frozen=True)
class AlignmentResult:
    ops: EditOps
    # (ref_token | None, hyp_token | None, kind) with kind in
    # {"match", "sub", "del", "ins"}
    path: tuple


def _tokens(seq):
    if isinstance(seq, str):
        return seq.split()
    return list(seq)


def levenshtein_align(ref, hyp) -> AlignmentResult:
    """Minimum-edit alignment with unit costs.

    Backtrace prefers match > substitution > deletion > insertion, giving
    a deterministic path; the total error count is tie-break invariant.
    """
    ref = _tokens(ref)
    hyp = _tokens(hyp)
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (ref[i - 1] != hyp[j - 1])
            row[j] = min(sub, prev[j] + 1, row[j - 1] + 1)

    path = []
    i, j = n, m
    s = d = ins = hits = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dist[i][j] == dist[i - 1][j - 1]:
            path.append((ref[i - 1], hyp[j - 1], "match"))
            hits += 1
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + 1:
            path.append((ref[i - 1], hyp[j - 1], "sub"))
            s += 1
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            path.append((ref[i - 1], None, "del"))
            d += 1
            i -= 1
        else:
            path.append((None, hyp[j - 1], "ins"))
            ins += 1
            j -= 1
    path.reverse()
    ops = EditOps(s, d, ins, hits, n)
    return AlignmentResult(ops, tuple(path))


def corpus_wer(pairs) -> tuple[float, EditOps]:
    """Micro-averaged WER over (ref, hyp) pairs; may exceed 1.0."""
    total = EditOps()
    n_pairs = 0
    for ref, hyp in pairs:
        total = total + levenshtein_align(ref, hyp).ops
        n_pairs += 1
    if n_pairs == 0 or total.ref_len == 0:
        raise ValueError("WER undefined: total reference length is zero")
    return total.errors / total.ref_len, total
