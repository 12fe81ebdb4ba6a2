"""Image-disjoint train/test splitting, review sampling, and clean-test
finalization.

Whole images are assigned to the test side until the pair budget is
first reached or crossed, which keeps the disjointness guarantee exact
at the cost of a bounded overshoot (at most max-pairs-per-image - 1).
All randomness is seeded and applied to canonically ordered inputs, so
the assignment is invariant to input order.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .hashing import stable_seed
from .qagen import QAPair


@dataclass(frozen=True)
class Budgets:
    test_pairs: int = 50000
    review_n: int = 2000


@dataclass(frozen=True)
class ReviewVerdictRecord:
    """One annotator decision as logged by the review service."""
    pair_id: str
    annotator: str
    accept: bool
    timestamp: float
    seq: int = 0  # position in the log; tiebreak for equal timestamps


@dataclass(frozen=True)
class SplitAssignment:
    train: frozenset[str]
    test_initial: frozenset[str]
    review_candidates: tuple[str, ...] = ()
    test_clean: frozenset[str] = frozenset()
    seed: int = 0
    budgets: Budgets = field(default_factory=Budgets)

    def to_dict(self) -> dict:
        return {
            "train": sorted(self.train),
            "test_initial": sorted(self.test_initial),
            "review_candidates": list(self.review_candidates),
            "test_clean": sorted(self.test_clean),
            "seed": self.seed,
            "budgets": {"test_pairs": self.budgets.test_pairs, "review_n": self.budgets.review_n},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitAssignment":
        return cls(
            train=frozenset(d["train"]),
            test_initial=frozenset(d["test_initial"]),
            review_candidates=tuple(d["review_candidates"]),
            test_clean=frozenset(d["test_clean"]),
            seed=d["seed"],
            budgets=Budgets(**d["budgets"]),
        )


def split_train_test(pairs: list[QAPair], budgets: Budgets, seed: int) -> SplitAssignment:
    """Assign whole images to test until the cumulative pair count first
    reaches or crosses budgets.test_pairs; everything else is train."""
    if budgets.test_pairs >= len(pairs):
        raise ValueError(f"test budget {budgets.test_pairs} must be below total pairs {len(pairs)}")

    by_image: dict[str, list[str]] = {}
    for p in sorted(pairs, key=lambda p: p.pair_id):
        by_image.setdefault(p.record_id, []).append(p.pair_id)

    images = sorted(by_image)
    rng = random.Random(stable_seed("train-test-split", seed))
    rng.shuffle(images)

    test_ids: set[str] = set()
    for image in images:
        if len(test_ids) >= budgets.test_pairs:
            break
        test_ids.update(by_image[image])

    train_ids = {p.pair_id for p in pairs} - test_ids
    return SplitAssignment(train=frozenset(train_ids), test_initial=frozenset(test_ids),
                           seed=seed, budgets=budgets)


def sample_for_review(assignment: SplitAssignment, seed: int,
                      warn=None) -> SplitAssignment:
    """Uniform seeded sample of review_n pairs from the initial test set,
    in presentation order."""
    if not assignment.test_initial:
        raise ValueError("test_initial is empty")
    n = assignment.budgets.review_n
    pool = sorted(assignment.test_initial)
    if n > len(pool):
        if warn:
            warn(f"review_n {n} exceeds test set size {len(pool)}; clamping")
        n = len(pool)
    rng = random.Random(stable_seed("review-sample", seed))
    candidates = tuple(rng.sample(pool, n))
    return replace(assignment, review_candidates=candidates)


def resolve_verdicts(verdicts: list[ReviewVerdictRecord]) -> dict[str, bool]:
    """Collapse a verdict log to one accept/reject per pair: latest verdict
    per annotator wins, then majority across annotators, ties reject."""
    latest: dict[tuple[str, str], ReviewVerdictRecord] = {}
    for v in verdicts:
        key = (v.pair_id, v.annotator)
        prev = latest.get(key)
        if prev is None or (v.timestamp, v.seq) >= (prev.timestamp, prev.seq):
            latest[key] = v

    votes: dict[str, list[bool]] = {}
    for (pair_id, _), v in latest.items():
        votes.setdefault(pair_id, []).append(v.accept)
    return {pid: sum(vs) * 2 > len(vs) for pid, vs in votes.items()}


def finalize_clean_test(assignment: SplitAssignment,
                        verdicts: list[ReviewVerdictRecord],
                        strict: bool = False) -> tuple[SplitAssignment, dict]:
    """Fill test_clean with the accepted review candidates; report the
    retention rate over resolved candidates."""
    resolved = resolve_verdicts(verdicts)
    unresolved = [pid for pid in assignment.review_candidates if pid not in resolved]
    if strict and unresolved:
        raise ValueError(f"unresolved review candidates: {', '.join(unresolved[:10])}")

    clean = frozenset(pid for pid in assignment.review_candidates if resolved.get(pid))
    n_resolved = len(assignment.review_candidates) - len(unresolved)
    telemetry = {
        "candidates": len(assignment.review_candidates),
        "resolved": n_resolved,
        "accepted": len(clean),
        "retention_rate": (len(clean) / n_resolved) if n_resolved else None,
    }
    return replace(assignment, test_clean=clean), telemetry
