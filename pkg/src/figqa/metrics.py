"""Scoring for the choice and blanking tasks.

Accuracy for generative output maps the free text onto the closest of
the four options by gestalt (longest-matching-block) string similarity;
BLEU-1 is clipped unigram precision with a brevity penalty; intervals
come from a seeded percentile bootstrap.

The similarity is computed on case-folded raw characters with no junk
heuristic, so it is a pure function of the two strings. Ties among
equal-length longest blocks go to the smallest start in the first
string, then the second.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .qagen import LETTERS, Option, QAPair
from .textnorm import tokenize


@dataclass(frozen=True)
class SimilarityBreakdown:
    matched_total: int
    len_a: int
    len_b: int
    ratio: float


def _longest_match(a: str, b: str, alo: int, ahi: int, blo: int, bhi: int,
                   b2j: dict[str, list[int]]) -> tuple[int, int, int]:
    """Longest block with a[i:i+k] == b[j:j+k] inside the window; among
    maximal blocks the one starting earliest in a, then earliest in b."""
    besti, bestj, bestsize = alo, blo, 0
    j2len: dict[int, int] = {}
    for i in range(alo, ahi):
        newj2len: dict[int, int] = {}
        for j in b2j.get(a[i], ()):
            if j < blo:
                continue
            if j >= bhi:
                break
            k = newj2len[j] = j2len.get(j - 1, 0) + 1
            if k > bestsize:
                besti, bestj, bestsize = i - k + 1, j - k + 1, k
        j2len = newj2len
    return besti, bestj, bestsize


def _matched_total(a: str, b: str, alo: int, ahi: int, blo: int, bhi: int,
                   b2j: dict[str, list[int]]) -> int:
    i, j, k = _longest_match(a, b, alo, ahi, blo, bhi, b2j)
    if k == 0:
        return 0
    return (k
            + _matched_total(a, b, alo, i, blo, j, b2j)
            + _matched_total(a, b, i + k, ahi, j + k, bhi, b2j))


def similarity_ratio(a: str, b: str) -> SimilarityBreakdown:
    """Gestalt similarity 2M / (|a| + |b|); two empty strings count as
    identical (ratio 1.0)."""
    if not a and not b:
        return SimilarityBreakdown(0, 0, 0, 1.0)
    b2j: dict[str, list[int]] = {}
    for j, ch in enumerate(b):
        b2j.setdefault(ch, []).append(j)
    m = _matched_total(a, b, 0, len(a), 0, len(b), b2j)
    return SimilarityBreakdown(m, len(a), len(b), 2.0 * m / (len(a) + len(b)))


def match_to_option(prediction_text: str, options: list[Option] | tuple[Option, ...]) -> str:
    """Map a free-text prediction to an option letter.

    A prediction that is exactly one letter takes the fast path; anything
    else is matched by similarity against the case-folded option texts,
    ties to the lowest option index.
    """
    trimmed = prediction_text.strip().casefold()
    if len(trimmed) == 1 and trimmed.upper() in LETTERS:
        return trimmed.upper()
    best_letter = options[0].letter
    best_ratio = -1.0
    for o in options:
        r = similarity_ratio(trimmed, o.text.casefold()).ratio
        if r > best_ratio:
            best_ratio = r
            best_letter = o.letter
    return best_letter


def accuracy(predictions: dict[str, str], gold: list[QAPair], task: str = "choice") -> float:
    """Fraction of pairs answered correctly; missing predictions count as
    wrong. The blanking task option-matches the free text exactly like
    the choice task scores generative output."""
    if task not in ("choice", "blanking"):
        raise ValueError(f"unknown task {task!r}")
    if not gold:
        raise ValueError("empty gold set")
    correct = 0
    for pair in gold:
        text = predictions.get(pair.pair_id)
        if text is None:
            continue
        if match_to_option(text, pair.options) == pair.answer_letter:
            correct += 1
    return correct / len(gold)


def per_sample_correct(predictions: dict[str, str], gold: list[QAPair]) -> list[int]:
    out = []
    for pair in gold:
        text = predictions.get(pair.pair_id)
        ok = text is not None and match_to_option(text, pair.options) == pair.answer_letter
        out.append(1 if ok else 0)
    return out


@dataclass(frozen=True)
class Bleu1Breakdown:
    clipped_matches: int
    candidate_len: int
    reference_len: int
    precision: float
    brevity_penalty: float
    score: float


def _bleu1_parts(candidate: str, reference: str) -> tuple[int, int, int]:
    cand = tokenize(candidate)
    ref_counts = Counter(tokenize(reference))
    clipped = sum(min(n, ref_counts.get(tok, 0)) for tok, n in Counter(cand).items())
    return clipped, len(cand), sum(ref_counts.values())


def _bleu1_score(clipped: int, c: int, r: int) -> Bleu1Breakdown:
    if c == 0:
        return Bleu1Breakdown(clipped, c, r, 0.0, 1.0, 0.0)
    p1 = clipped / c
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return Bleu1Breakdown(clipped, c, r, p1, bp, bp * p1)


def bleu1_sentence(candidate: str, reference: str) -> Bleu1Breakdown:
    return _bleu1_score(*_bleu1_parts(candidate, reference))


def bleu1(predictions: dict[str, str], gold: list[QAPair],
          warn=None) -> tuple[Bleu1Breakdown, list[float]]:
    """Corpus-level clipped unigram precision against the gold answer
    texts, plus per-sample sentence scores for the macro average."""
    if not gold:
        raise ValueError("empty gold set")
    total_clipped = total_c = total_r = 0
    per_sample = []
    for pair in gold:
        text = predictions.get(pair.pair_id, "")
        clipped, c, r = _bleu1_parts(text, pair.answer_text)
        total_clipped += clipped
        total_c += c
        total_r += r
        per_sample.append(_bleu1_score(clipped, c, r).score)
    if total_c == 0 and warn:
        warn("all candidates empty; BLEU-1 is 0")
    return _bleu1_score(total_clipped, total_c, total_r), per_sample


def bootstrap_ci(values: list[float], b: int = 1000, alpha: float = 0.05,
                 seed: int = 0) -> tuple[float, float]:
    """Seeded percentile bootstrap of the mean: B resamples with
    replacement, interval at the alpha/2 and 1-alpha/2 quantiles."""
    if not values:
        raise ValueError("empty sample")
    arr = np.asarray(values, dtype=np.float64)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(arr), size=(b, len(arr)))
    stats = arr[idx].mean(axis=1)
    lo, hi = np.percentile(stats, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)


def eval_report(predictions: dict[str, str], gold: list[QAPair], task: str,
                b: int = 1000, alpha: float = 0.05, seed: int = 0,
                include_per_sample: bool = False) -> dict:
    """Full scoring report: ACC and BLEU-1 with bootstrap intervals."""
    correct = per_sample_correct(predictions, gold)
    acc = sum(correct) / len(correct)
    acc_lo, acc_hi = bootstrap_ci([float(c) for c in correct], b, alpha, seed)
    corpus_bleu, sample_bleus = bleu1(predictions, gold)
    bleu_lo, bleu_hi = bootstrap_ci(sample_bleus, b, alpha, seed)
    report = {
        "task": task,
        "n_gold": len(gold),
        "n_predictions": len(predictions),
        "acc": {"point": acc, "ci": [acc_lo, acc_hi]},
        "bleu1": {
            "corpus": corpus_bleu.score,
            "macro": sum(sample_bleus) / len(sample_bleus),
            "ci_macro": [bleu_lo, bleu_hi],
            "clipped_matches": corpus_bleu.clipped_matches,
            "candidate_len": corpus_bleu.candidate_len,
            "reference_len": corpus_bleu.reference_len,
            "brevity_penalty": corpus_bleu.brevity_penalty,
        },
        "bootstrap": {"B": b, "alpha": alpha, "seed": seed, "method": "percentile"},
    }
    if include_per_sample:
        report["per_sample"] = [
            {"pair_id": p.pair_id, "correct": c, "bleu1": s}
            for p, c, s in zip(gold, correct, sample_bleus)
        ]
    return report
