"""Tour of the scoring toolkit: string similarity, option matching, BLEU-1,
and bootstrap confidence intervals.

Everything here is deterministic: the bootstrap takes an explicit seed and
the similarity ratio is a pure function of its two strings.
"""

import random

from figqa.metrics import (
    bleu1_sentence,
    bootstrap_ci,
    eval_report,
    match_to_option,
    similarity_ratio,
)
from figqa.qagen import Option, QAPair, Stage


def main() -> None:
    print("== gestalt similarity ==")
    for a, b in [("survey", "surgery"), ("peak flux", "peak flux"),
                 ("left panel", "right panel"), ("", "")]:
        s = similarity_ratio(a, b)
        print(f"  ratio({a!r}, {b!r}) = {s.ratio:.4f}  "
              f"(matched {s.matched_total}/{s.len_a}+{s.len_b})")
    # the recursive longest-block match is direction-sensitive by design
    fwd, rev = similarity_ratio("ab", "bacb"), similarity_ratio("bacb", "ab")
    print(f"  order matters: {fwd.ratio:.4f} vs {rev.ratio:.4f}")

    print("\n== free text -> option letter ==")
    options = (Option("A", "the flux rises"), Option("B", "the flux falls"),
               Option("C", "no clear trend"), Option("D", "data is missing"))
    for pred in ["B", "the flux is falling", "rises", "banana"]:
        print(f"  {pred!r} -> {match_to_option(pred, options)}")

    print("\n== BLEU-1 with brevity penalty ==")
    for cand, ref in [("the flux falls", "the flux falls"),
                      ("flux", "the flux falls"),
                      ("the the the the", "the flux falls")]:
        b = bleu1_sentence(cand, ref)
        print(f"  bleu1({cand!r} | {ref!r}) = {b.score:.4f}  "
              f"(clipped {b.clipped_matches}/{b.candidate_len}, BP {b.brevity_penalty:.3f})")

    print("\n== seeded percentile bootstrap ==")
    rng = random.Random(3)
    sample = [rng.random() < 0.4 for _ in range(400)]
    values = [float(v) for v in sample]
    mean = sum(values) / len(values)
    lo, hi = bootstrap_ci(values, b=1000, alpha=0.05, seed=11)
    lo2, hi2 = bootstrap_ci(values, b=1000, alpha=0.05, seed=11)
    print(f"  mean {mean:.4f}, 95% CI [{lo:.4f}, {hi:.4f}]")
    print(f"  same seed reproduces the interval: {(lo, hi) == (lo2, hi2)}")

    print("\n== full report on a toy gold set ==")
    gold = []
    for i in range(8):
        texts = [f"option {j} for q{i}" for j in range(4)]
        gold.append(QAPair(
            pair_id=f"p{i:02d}", record_id=f"rec{i:04d}", question_index=1,
            question=f"What does panel {i} show?",
            options=tuple(Option(l, t) for l, t in zip("ABCD", texts)),
            answer_letter="C", stage=Stage.TEST_CLEAN))
    predictions = {p.pair_id: (p.options[2].text if i % 2 == 0 else p.options[0].text)
                   for i, p in enumerate(gold)}
    report = eval_report(predictions, gold, task="choice", b=500, seed=7)
    print(f"  acc {report['acc']['point']:.3f}  CI {report['acc']['ci']}")
    print(f"  bleu1 corpus {report['bleu1']['corpus']:.3f}  "
          f"macro {report['bleu1']['macro']:.3f}")


if __name__ == "__main__":
    main()
