"""Slow, independent re-implementations of the evaluation metrics.

Everything here counts naively: n-gram overlap by scanning lists, LCS by
memoized recursion. The final score expressions intentionally match the
production formulas so that identical counts give identical floats; the
point of independence is the counting itself.
"""

from __future__ import annotations

from functools import lru_cache
from math import exp, log
from typing import Sequence


def ngram_list(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def clipped_overlap(hyp_tokens: Sequence[str], ref_tokens: Sequence[str], n: int) -> tuple[int, int, int]:
    hyp_ngrams = ngram_list(hyp_tokens, n)
    ref_ngrams = ngram_list(ref_tokens, n)
    overlap = 0
    for gram in set(hyp_ngrams):
        overlap += min(hyp_ngrams.count(gram), ref_ngrams.count(gram))
    return overlap, len(hyp_ngrams), len(ref_ngrams)


def rouge_n_naive(hyp_tokens: Sequence[str], ref_tokens: Sequence[str], n: int) -> float:
    overlap, total_hyp, total_ref = clipped_overlap(hyp_tokens, ref_tokens, n)
    if total_hyp == 0 or total_ref == 0:
        return 0.0
    precision = overlap / total_hyp
    recall = overlap / total_ref
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def lcs_len_naive(a: Sequence[str], b: Sequence[str]) -> int:
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def rec(i: int, j: int) -> int:
        if i == 0 or j == 0:
            return 0
        if a[i - 1] == b[j - 1]:
            return rec(i - 1, j - 1) + 1
        return max(rec(i - 1, j), rec(i, j - 1))

    result = rec(len(a), len(b))
    rec.cache_clear()
    return result


def lcs_ref_indices_naive(ref: Sequence[str], hyp: Sequence[str]) -> set[int]:
    """Backtrack with the shared preference rule: diagonal on match, then up
    when strictly longer, else left."""
    ref, hyp = tuple(ref), tuple(hyp)

    @lru_cache(maxsize=None)
    def length(i: int, j: int) -> int:
        if i == 0 or j == 0:
            return 0
        if ref[i - 1] == hyp[j - 1]:
            return length(i - 1, j - 1) + 1
        return max(length(i - 1, j), length(i, j - 1))

    picked: set[int] = set()
    i, j = len(ref), len(hyp)
    while i > 0 and j > 0:
        if ref[i - 1] == hyp[j - 1]:
            picked.add(i - 1)
            i -= 1
            j -= 1
        elif length(i - 1, j) > length(i, j - 1):
            i -= 1
        else:
            j -= 1
    length.cache_clear()
    return picked


def rouge_l_naive(hyp_tokens: Sequence[str], ref_tokens: Sequence[str]) -> float:
    if not hyp_tokens or not ref_tokens:
        return 0.0
    lcs = lcs_len_naive(ref_tokens, hyp_tokens)
    precision = lcs / len(hyp_tokens)
    recall = lcs / len(ref_tokens)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_lsum_naive(hyp_sents: Sequence[Sequence[str]], ref_sents: Sequence[Sequence[str]]) -> float:
    m = sum(len(s) for s in ref_sents)
    n = sum(len(s) for s in hyp_sents)
    if m == 0 or n == 0:
        return 0.0
    ref_budget: dict[str, int] = {}
    hyp_budget: dict[str, int] = {}
    for sent in ref_sents:
        for token in sent:
            ref_budget[token] = ref_budget.get(token, 0) + 1
    for sent in hyp_sents:
        for token in sent:
            hyp_budget[token] = hyp_budget.get(token, 0) + 1
    hits = 0
    for sent in ref_sents:
        union: set[int] = set()
        for hyp_sent in hyp_sents:
            union |= lcs_ref_indices_naive(sent, hyp_sent)
        for idx in sorted(union):
            token = sent[idx]
            if ref_budget.get(token, 0) > 0 and hyp_budget.get(token, 0) > 0:
                hits += 1
                ref_budget[token] -= 1
                hyp_budget[token] -= 1
    precision = hits / n
    recall = hits / m
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def bleu2_naive(hyp_tokens: Sequence[str], ref_tokens: Sequence[str]) -> float:
    if not hyp_tokens or not ref_tokens:
        return 0.0
    o1, t1, _ = clipped_overlap(hyp_tokens, ref_tokens, 1)
    o2, t2, _ = clipped_overlap(hyp_tokens, ref_tokens, 2)
    if t1 == 0 or o1 == 0 or t2 == 0 or o2 == 0:
        return 0.0
    p1, p2 = o1 / t1, o2 / t2
    bp = 1.0 if len(hyp_tokens) >= len(ref_tokens) else exp(1.0 - len(ref_tokens) / len(hyp_tokens))
    return bp * exp(0.5 * log(p1) + 0.5 * log(p2))
