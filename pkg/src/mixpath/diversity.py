"""Generation-diversity metrics over a set of token sequences.

div_ngram: one minus the intersection-over-union of unique n-grams across
the M sequences, averaged over n = 1..4 (n with an empty union skipped).

div_bleu: one minus the mean pairwise smoothed BLEU over unordered pairs,
earlier sequence as hypothesis.

BLEU here averages BLEU-1..BLEU-4 with Smoothing1 (zero match counts
replaced by 0.1).  N-grams are counted over the sequence left-padded with
n-1 boundary markers, so every order contributes exactly |hyp| n-grams;
identical sequences score 1 and no order ever has a zero denominator.
"""
from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

_SMOOTH_EPS = 0.1
_ORDERS = (1, 2, 3, 4)
_PAD = None  # boundary marker distinct from every token


class EmptySequence(ValueError):
    pass


class TooFewSequences(ValueError):
    pass


class AllUnionsEmpty(ValueError):
    pass


def ngram_set(seq: Sequence[str], n: int) -> set[tuple[str, ...]]:
    """Unique contiguous n-token windows; empty when len(seq) < n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return {tuple(seq[i : i + n]) for i in range(len(seq) - n + 1)}


def _padded_ngrams(seq: Sequence[str], n: int) -> Counter:
    padded = [_PAD] * (n - 1) + list(seq)
    return Counter(tuple(padded[i : i + n]) for i in range(len(seq)))


def bleu_smoothing1(hyp: Sequence[str], ref: Sequence[str]) -> float:
    """Mean of smoothed BLEU-1..4 with brevity penalty; in [0, 1]."""
    if not hyp or not ref:
        raise EmptySequence("hypothesis and reference must be non-empty")
    bp = min(1.0, math.exp(1.0 - len(ref) / len(hyp)))
    total = 0.0
    for n in _ORDERS:
        hyp_counts = _padded_ngrams(hyp, n)
        ref_counts = _padded_ngrams(ref, n)
        matched = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        numer = matched if matched > 0 else _SMOOTH_EPS
        total += bp * numer / len(hyp)
    return total / len(_ORDERS)


def div_ngram(sequences: Sequence[Sequence[str]]) -> float:
    """Average over n of 1 - |intersection| / |union| of unique n-grams."""
    if len(sequences) < 1:
        raise TooFewSequences("div_ngram needs at least one sequence")
    values = []
    for n in _ORDERS:
        sets = [ngram_set(s, n) for s in sequences]
        union = set().union(*sets)
        if not union:
            continue
        inter = set(sets[0]).intersection(*sets[1:])
        values.append(1.0 - len(inter) / len(union))
    if not values:
        raise AllUnionsEmpty("every sequence is empty")
    return sum(values) / len(values)


def div_bleu(sequences: Sequence[Sequence[str]]) -> float:
    """1 - mean pairwise BLEU over the M(M-1)/2 unordered pairs (i < j)."""
    m = len(sequences)
    if m < 2:
        raise TooFewSequences("div_bleu needs at least two sequences")
    total = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            total += bleu_smoothing1(sequences[i], sequences[j])
    return 1.0 - total / (m * (m - 1) / 2)


def diversity_report(sequences: Sequence[Sequence[str]]) -> dict:
    """CLI-facing summary: both metrics plus the per-n breakdown."""
    per_n = {}
    for n in _ORDERS:
        sets = [ngram_set(s, n) for s in sequences]
        union = set().union(*sets)
        if not union:
            per_n[f"div_{n}gram"] = None
            continue
        inter = set(sets[0]).intersection(*sets[1:])
        per_n[f"div_{n}gram"] = 1.0 - len(inter) / len(union)
    return {
        "m": len(sequences),
        "div_ngram": div_ngram(sequences),
        "div_bleu": div_bleu(sequences) if len(sequences) >= 2 else None,
        **per_n,
    }
