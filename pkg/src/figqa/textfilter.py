"""Language-only answerability filter.

Each pair gets five trials with independently shuffled option lists; a
text-only answerer that gets the gold option right in at least three of
the five is evidence the question never needed the image, and the pair
is dismissed. Trial seeds derive from (run_seed, pair_id, trial_index)
so trials are order-independent and the whole run is reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Protocol

from .hashing import stable_seed
from .qagen import LETTERS, Option, QAPair, Stage

N_TRIALS = 5
DISMISS_THRESHOLD = 3


class Answerer(Protocol):
    def answer(self, question: str, options: list[Option]) -> str | None:
        """Return a letter A-D, or None to abstain."""


@dataclass(frozen=True)
class AnswerTrial:
    trial_index: int
    permutation: tuple[int, int, int, int]  # original position -> shuffled position
    predicted_letter: str | None  # None = abstain
    correct: bool
    failed: bool = False

    def to_dict(self) -> dict:
        return {
            "trial_index": self.trial_index,
            "permutation": list(self.permutation),
            "predicted_letter": self.predicted_letter,
            "correct": self.correct,
            "failed": self.failed,
        }


@dataclass(frozen=True)
class TextOnlyVerdict:
    pair_id: str
    trials: tuple[AnswerTrial, ...]
    n_correct: int
    dismissed: bool

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "trials": [t.to_dict() for t in self.trials],
            "n_correct": self.n_correct,
            "dismissed": self.dismissed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TextOnlyVerdict":
        trials = tuple(
            AnswerTrial(t["trial_index"], tuple(t["permutation"]), t["predicted_letter"],
                        t["correct"], t.get("failed", False))
            for t in d["trials"]
        )
        return cls(d["pair_id"], trials, d["n_correct"], d["dismissed"])


@dataclass(frozen=True)
class FilterPartition:
    part_a: frozenset[str]
    part_b: frozenset[str]
    seed: int


def partition_for_filter(pairs: list[QAPair], seed: int) -> FilterPartition:
    """Seeded halving of the pair set; each half is meant to be answered by
    a model trained externally on the other half."""
    if not pairs:
        raise ValueError("cannot partition an empty pair list")
    ids = sorted(p.pair_id for p in pairs)
    rng = random.Random(stable_seed("filter-partition", seed))
    rng.shuffle(ids)
    half = (len(ids) + 1) // 2
    return FilterPartition(frozenset(ids[:half]), frozenset(ids[half:]), seed)


def shuffle_options(pair: QAPair, run_seed: int, trial_index: int
                    ) -> tuple[list[Option], tuple[int, int, int, int]]:
    """Shuffle the option list for one trial; letters are reassigned in
    shuffled order and the original->shuffled permutation returned."""
    rng = random.Random(stable_seed("trial-shuffle", run_seed, pair.pair_id, trial_index))
    order = [0, 1, 2, 3]
    rng.shuffle(order)  # order[new_pos] = original_pos
    shuffled = [Option(LETTERS[new_pos], pair.options[orig].text)
                for new_pos, orig in enumerate(order)]
    perm = [0] * 4
    for new_pos, orig in enumerate(order):
        perm[orig] = new_pos
    return shuffled, tuple(perm)


def run_trials(answerer: Answerer, pair: QAPair, run_seed: int) -> TextOnlyVerdict:
    """Five shuffled trials; abstentions and transport failures count as
    incorrect so ambiguous pairs survive to later filters."""
    gold_pos = LETTERS.index(pair.answer_letter)
    trials = []
    for t in range(N_TRIALS):
        shuffled, perm = shuffle_options(pair, run_seed, t)
        failed = False
        try:
            predicted = answerer.answer(pair.question, shuffled)
        except Exception:
            predicted = None
            failed = True
        correct = predicted is not None and LETTERS.index(predicted) == perm[gold_pos]
        trials.append(AnswerTrial(t, perm, predicted, correct, failed))
    n_correct = sum(t.correct for t in trials)
    return TextOnlyVerdict(pair.pair_id, tuple(trials), n_correct,
                           dismissed=n_correct >= DISMISS_THRESHOLD)


def apply_filter(pairs: list[QAPair], verdicts: dict[str, TextOnlyVerdict]) -> list[QAPair]:
    """Keep pairs the language-only answerer could not reliably answer."""
    missing = [p.pair_id for p in pairs if p.pair_id not in verdicts]
    if missing:
        raise ValueError(f"missing verdicts for pairs: {', '.join(missing[:5])}")
    return [p.with_stage(Stage.KEPT_BY_TEXT_FILTER)
            for p in pairs if not verdicts[p.pair_id].dismissed]


# ---------------------------------------------------------------------------
# mock answerers


class OracleAnswerer:
    """Always finds the gold option (matches by option text)."""

    def __init__(self, gold_texts: dict[str, str]):
        # question -> gold option text
        self.gold_texts = gold_texts

    def answer(self, question: str, options: list[Option]) -> str | None:
        gold = self.gold_texts.get(question)
        for o in options:
            if o.text == gold:
                return o.letter
        return None


class ConstantAnswerer:
    def __init__(self, letter: str | None = "A"):
        self.letter = letter

    def answer(self, question: str, options: list[Option]) -> str | None:
        return self.letter


class UniformRandomAnswerer:
    """Picks one of the four letters uniformly per call.

    A per-question call counter feeds the seed so repeated trials are
    independent draws even when two trials shuffle the options into the
    same order; the call sequence per pair is sequential, so runs stay
    deterministic.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._calls: dict[str, int] = {}

    def answer(self, question: str, options: list[Option]) -> str | None:
        n = self._calls.get(question, 0)
        self._calls[question] = n + 1
        rng = random.Random(stable_seed("uniform-answerer", self.seed, question, n))
        return rng.choice(LETTERS)


class HttpAnswerer:
    """POSTs {question, options:[{letter,text}x4]} and expects {letter}."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def answer(self, question: str, options: list[Option]) -> str | None:
        import requests

        resp = requests.post(
            self.url,
            json={"question": question,
                  "options": [{"letter": o.letter, "text": o.text} for o in options]},
            timeout=self.timeout,
        )
        resp.raise_for_status()
        letter = resp.json().get("letter")
        return letter if letter in LETTERS else None
