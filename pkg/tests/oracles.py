"""Independent reference implementations used only to check the library.

These deliberately use the dumbest correct algorithm available so they
share no code path with the implementations they verify.
"""

from __future__ import annotations

from collections import Counter


def brute_longest_match(a: str, b: str, alo: int, ahi: int, blo: int, bhi: int
                        ) -> tuple[int, int, int]:
    """O(n^3) scan for the longest common block; ties go to the smallest
    start in a, then in b."""
    best_i, best_j, best_k = alo, blo, 0
    for i in range(alo, ahi):
        for j in range(blo, bhi):
            k = 0
            while i + k < ahi and j + k < bhi and a[i + k] == b[j + k]:
                k += 1
            if k > best_k:
                best_i, best_j, best_k = i, j, k
    return best_i, best_j, best_k


def brute_matched_total(a: str, b: str, alo: int = 0, ahi: int | None = None,
                        blo: int = 0, bhi: int | None = None) -> int:
    if ahi is None:
        ahi = len(a)
    if bhi is None:
        bhi = len(b)
    i, j, k = brute_longest_match(a, b, alo, ahi, blo, bhi)
    if k == 0:
        return 0
    return (k
            + brute_matched_total(a, b, alo, i, blo, j)
            + brute_matched_total(a, b, i + k, ahi, j + k, bhi))


def brute_ratio(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 2.0 * brute_matched_total(a, b) / (len(a) + len(b))


def brute_bleu1(candidate_tokens: list[str], reference_tokens: list[str]) -> float:
    """Clipped unigram precision times brevity penalty, written longhand."""
    import math

    c, r = len(candidate_tokens), len(reference_tokens)
    if c == 0:
        return 0.0
    ref_counts = Counter(reference_tokens)
    clipped = 0
    for tok, n in Counter(candidate_tokens).items():
        clipped += min(n, ref_counts.get(tok, 0))
    p1 = clipped / c
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * p1


def binomial_tail_3_of_5(p: float = 0.25) -> float:
    """Exact P(X >= 3) for X ~ Binomial(5, p)."""
    from math import comb

    return sum(comb(5, k) * p ** k * (1 - p) ** (5 - k) for k in (3, 4, 5))
