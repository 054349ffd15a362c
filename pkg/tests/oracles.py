"""Independent brute-force oracles shared by unit and acceptance tests.

These are deliberately separate implementations (naive loops, different
data structures) of the quantities the package computes, so agreement is
meaningful.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter


# --- assignment problems ---------------------------------------------------

def exhaustive_best_total(scores) -> float:
    """Optimal injective assignment total over all column permutations."""
    j_n, k_n = scores.shape
    best = -math.inf
    for cols in itertools.permutations(range(k_n), j_n):
        best = max(best, sum(scores[j, cols[j]] for j in range(j_n)))
    return best


def dp_best_total(scores) -> float:
    """Optimal injective assignment total via bitmask DP over latents."""
    j_n, k_n = scores.shape
    frontier = {0: 0.0}
    for j in range(j_n):
        new: dict[int, float] = {}
        for mask, value in frontier.items():
            for k in range(k_n):
                bit = 1 << k
                if mask & bit:
                    continue
                cand = value + scores[j, k]
                key = mask | bit
                if key not in new or cand > new[key]:
                    new[key] = cand
        frontier = new
    return max(frontier.values())


def pseudocode_greedy(scores) -> dict[int, int]:
    """Sorted-scan assignment transcribed directly from the repeat/for
    pseudocode shape: build the full (j, k, l) list, sort by l, then keep
    scanning from the top until every target holds a latent."""
    j_n, k_n = scores.shape
    gamma = []
    j = 0
    while j < j_n:
        k = 0
        while k < k_n:
            gamma.append((j, k, scores[j, k]))
            k += 1
        j += 1
    gamma.sort(key=lambda item: (-item[2], item[0], item[1]))
    delta: dict[int, int] = {}
    taken_latents: set[int] = set()
    while len(delta) < j_n:
        progressed = False
        for j, k, _ in gamma:
            if j not in delta and k not in taken_latents:
                delta[j] = k
                taken_latents.add(k)
                progressed = True
        if not progressed:
            break
    return delta


# --- diversity metrics ------------------------------------------------------

def oracle_ngram_set(seq, n):
    return set(tuple(seq[i : i + n]) for i in range(max(0, len(seq) - n + 1)))


def oracle_div_ngram(seqs) -> float:
    vals = []
    for n in (1, 2, 3, 4):
        sets = [oracle_ngram_set(s, n) for s in seqs]
        union = set()
        for s in sets:
            union |= s
        if not union:
            continue
        inter = sets[0].copy()
        for s in sets[1:]:
            inter &= s
        vals.append(1 - len(inter) / len(union))
    return sum(vals) / len(vals)


def oracle_bleu(hyp, ref) -> float:
    total = 0.0
    bp = min(1.0, math.exp(1 - len(ref) / len(hyp)))
    for n in (1, 2, 3, 4):
        pad = [None] * (n - 1)
        hgrams = Counter(tuple((pad + list(hyp))[i : i + n]) for i in range(len(hyp)))
        rgrams = Counter(tuple((pad + list(ref))[i : i + n]) for i in range(len(ref)))
        match = sum(min(c, rgrams.get(g, 0)) for g, c in hgrams.items())
        total += bp * (match if match else 0.1) / len(hyp)
    return total / 4


def oracle_div_bleu(seqs) -> float:
    pair_vals = [oracle_bleu(a, b) for a, b in itertools.combinations(seqs, 2)]
    return 1 - sum(pair_vals) / len(pair_vals)
