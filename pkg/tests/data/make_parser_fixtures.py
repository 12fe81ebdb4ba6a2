"""Generate the committed parser fixture corpus.

Each fixture is built from known-good blocks with a known corruption
applied, so the expected pair count and issue kinds are determined by
construction, not by running the parser. Rerun this script only if the
fixture schema changes; the output is committed.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

WORDS = ["sagittal", "axial", "coronal", "liver", "kidney", "brain", "chest",
         "lesion", "mass", "edema", "scan", "arrow", "enhancement", "nodule",
         "contrast", "slice", "margin", "cortex", "ventricle", "opacity"]
ANSWER_FORMS = ["{L}", "The correct option({L}).", "The correct option is {L}"]


def good_block(rng: random.Random, idx: int) -> str:
    q = f"Which {rng.choice(WORDS)} is seen near the {rng.choice(WORDS)}?"
    opts = rng.sample(WORDS, 4)
    letter = rng.choice("ABCD")
    ans = rng.choice(ANSWER_FORMS).format(L=letter)
    return (f"i:{idx} question:{q} choice: "
            f"A:{opts[0]} B:{opts[1]} C:{opts[2]} D:{opts[3]} answer: {ans}")


def main() -> None:
    rng = random.Random(20240817)
    fixtures = []

    def add(kind: str, text: str, n_pairs: int, issue_kinds: list[str]):
        fixtures.append({
            "record_id": f"fx{len(fixtures):04d}",
            "category": kind,
            "response_text": text,
            "expect_pairs": n_pairs,
            "expect_issue_kinds": sorted(issue_kinds),
        })

    # 80 fully well-formed responses of 3..5 blocks
    for _ in range(80):
        n = rng.randint(3, 5)
        blocks = [good_block(rng, i) for i in range(1, n + 1)]
        add("well_formed", "\n".join(blocks), n, [])

    # 25 with the last block missing its answer field
    for _ in range(25):
        blocks = [good_block(rng, i) for i in range(1, 5)]
        broken = good_block(rng, 5).split(" answer:")[0]
        add("missing_answer", "\n".join(blocks + [broken]), 4, ["missing_field"])

    # 25 with one block missing option D
    for _ in range(25):
        blocks = [good_block(rng, i) for i in range(1, 6)]
        victim = rng.randrange(5)
        blocks[victim] = blocks[victim].replace(" D:", " X:", 1)
        add("missing_option", "\n".join(blocks), 4, ["missing_option"])

    # 25 with a repeated question index
    for _ in range(25):
        blocks = [good_block(rng, i) for i in [1, 2, 3, 3, 4]]
        add("duplicate_index", "\n".join(blocks), 4, ["duplicate_block"])

    # 15 with six blocks (one past the requested five)
    for _ in range(15):
        blocks = [good_block(rng, i) for i in range(1, 7)]
        add("extra_block", "\n".join(blocks), 5, ["duplicate_block"])

    # 15 with an unextractable answer letter
    for _ in range(15):
        blocks = [good_block(rng, i) for i in range(1, 5)]
        bad = good_block(rng, 5).split(" answer:")[0] + " answer: " + \
            rng.choice(["none of the above", "either A or B", "unknown"])
        add("bad_answer", "\n".join(blocks + [bad]), 4, ["bad_answer_letter"])

    # 10 refusals
    refusals = [
        "I'm sorry, but I cannot generate questions for this caption.",
        "Sorry, the caption is too short for me to produce five questions.",
        "As an AI model I am unable to comply with this request.",
    ]
    for _ in range(10):
        add("refusal", rng.choice(refusals), 0, ["refusal_text"])

    # 5 empty responses
    for _ in range(5):
        add("empty", "", 0, ["no_blocks"])

    assert len(fixtures) == 200, len(fixtures)
    out = Path(__file__).parent / "parser_fixtures.jsonl"
    with open(out, "w", encoding="utf-8") as f:
        for fx in fixtures:
            f.write(json.dumps(fx, sort_keys=True) + "\n")
    print(f"wrote {len(fixtures)} fixtures to {out}")


if __name__ == "__main__":
    main()
