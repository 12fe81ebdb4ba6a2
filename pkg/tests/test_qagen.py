import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_pair
from figqa import qagen
from figqa.corpus import ImageCaptionRecord

DATA = Path(__file__).parent / "data"


def record(caption="CT of the abdomen.") -> ImageCaptionRecord:
    return ImageCaptionRecord("rec0001", "s1", "img/rec0001.jpg", caption, "cc-by")


class FlakyClient:
    backend_id = "flaky"

    def __init__(self, failures: int, text: str = "i:1 question:q? choice: A:a B:b C:c D:d answer: A"):
        self.failures = failures
        self.text = text

    def complete(self, prompt, params):
        if self.failures > 0:
            self.failures -= 1
            raise qagen.TransportError("boom")
        return self.text


# --- prompt -----------------------------------------------------------------

def test_build_prompt_contains_instruction_and_caption_once():
    prompt = qagen.build_prompt("CT of the abdomen.")
    assert prompt.startswith(qagen.PROMPT_INSTRUCTION)
    assert prompt.count("CT of the abdomen.") == 1
    assert "Ask 5 questions about the content" in prompt
    assert "answer: The correct option(A\\B\\C\\D)" in prompt


def test_build_prompt_rejects_empty_caption():
    with pytest.raises(ValueError):
        qagen.build_prompt("   ")


def test_prompts_differ_only_in_caption_slot():
    p1 = qagen.build_prompt("caption one")
    p2 = qagen.build_prompt("caption two")
    assert p1.removesuffix("caption one") == p2.removesuffix("caption two")


# --- generate ---------------------------------------------------------------

def test_mock_client_deterministic():
    client = qagen.MockGenerationClient(seed=3)
    g1 = qagen.generate(client, record())
    g2 = qagen.generate(client, record())
    assert g1.response_text == g2.response_text
    assert g1.request_fingerprint == g2.request_fingerprint


def test_generate_retries_then_succeeds():
    gen = qagen.generate(FlakyClient(failures=2), record(), sleep=lambda s: None)
    assert not gen.failed
    assert gen.retries == 2
    assert gen.response_text


def test_generate_permanent_failure_marked():
    gen = qagen.generate(FlakyClient(failures=99), record(), max_retries=2, sleep=lambda s: None)
    assert gen.failed
    assert gen.response_text == ""
    pairs, _ = qagen.parse_generation(gen)
    assert pairs == []


# --- parse ------------------------------------------------------------------

def test_parse_five_well_formed_blocks():
    text = qagen.MockGenerationClient(seed=0).complete(
        qagen.build_prompt("axial view of the liver with contrast enhancement showing lesion"), {})
    pairs, issues = qagen.parse_generation(
        qagen.RawGeneration("rec0001", "mock:0", text, "fp"))
    assert len(pairs) == 5
    assert issues == []
    for p in pairs:
        assert p.answer_letter in qagen.LETTERS
        assert len(p.options) == 4


def test_parse_empty_response():
    pairs, issues = qagen.parse_generation(qagen.RawGeneration("r", "m", "", "fp"))
    assert pairs == []
    assert [i.kind for i in issues] == ["no_blocks"]


def test_parse_missing_option_d():
    text = "i:1 question:what is shown? choice: A:liver B:kidney C:spleen answer: A"
    pairs, issues = qagen.parse_generation(qagen.RawGeneration("r", "m", text, "fp"))
    assert pairs == []
    assert [i.kind for i in issues] == ["missing_option"]


def test_parse_answer_phrase():
    text = ("i:1 question:what is shown? choice: A:liver B:kidney C:spleen D:heart "
            "answer: The correct option is B")
    pairs, issues = qagen.parse_generation(qagen.RawGeneration("r", "m", text, "fp"))
    assert issues == []
    assert pairs[0].answer_letter == "B"


def test_parse_label_case_and_whitespace_tolerance():
    text = ("I : 1 Question:\n what is shown?\n Choice:\n A : liver  B: kidney\n"
            " C :spleen D:heart\n Answer:  C")
    pairs, issues = qagen.parse_generation(qagen.RawGeneration("r", "m", text, "fp"))
    assert issues == []
    assert pairs[0].question == "what is shown?"
    assert pairs[0].answer_letter == "C"
    assert [o.text for o in pairs[0].options] == ["liver", "kidney", "spleen", "heart"]


def test_parse_indistinct_options_kept_but_flagged():
    text = "i:1 question:what? choice: A:same B:same C:other D:more answer: A"
    pairs, issues = qagen.parse_generation(qagen.RawGeneration("r", "m", text, "fp"))
    assert len(pairs) == 1
    assert "indistinct_options" in pairs[0].flags


def test_parse_issue_spans_within_bounds():
    for line in open(DATA / "parser_fixtures.jsonl", encoding="utf-8"):
        fx = json.loads(line)
        gen = qagen.RawGeneration(fx["record_id"], "m", fx["response_text"], "fp")
        _, issues = qagen.parse_generation(gen)
        limit = len(gen.response_text.encode("utf-8"))
        for issue in issues:
            lo, hi = issue.span
            assert 0 <= lo <= hi <= limit


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=400))
def test_parse_total_on_arbitrary_text(text):
    pairs, issues = qagen.parse_generation(qagen.RawGeneration("r", "m", text, "fp"))
    for p in pairs:  # constructor enforces the type invariants
        assert p.answer_letter in qagen.LETTERS
    assert all(i.kind in {"no_blocks", "missing_field", "missing_option",
                          "bad_answer_letter", "duplicate_block", "refusal_text"}
               for i in issues)


def test_render_parse_round_trip():
    client = qagen.MockGenerationClient(seed=9)
    text = client.complete(qagen.build_prompt(
        "sagittal MRI of the spine with nodular enhancement and mild edema present"), {})
    pairs, _ = qagen.parse_generation(qagen.RawGeneration("rec0001", "mock:9", text, "fp"))
    pairs = qagen.dedup_pairs(pairs)[0]
    rendered = qagen.render_pairs(pairs)
    reparsed, issues = qagen.parse_generation(
        qagen.RawGeneration("rec0001", "mock:9", rendered, "fp"))
    assert issues == []
    assert reparsed == pairs


def test_pair_id_stable_and_content_sensitive():
    p1 = make_pair()
    p2 = make_pair()
    p3 = make_pair(question="A different question?")
    assert p1.pair_id == p2.pair_id
    assert p1.pair_id != p3.pair_id


# --- dedup ------------------------------------------------------------------

def test_dedup_drops_repeats():
    q = "What does the arrow indicate?"
    pairs = [
        make_pair(question=q, question_index=1),
        make_pair(question="Another question?", question_index=2),
        make_pair(question=q.upper(), question_index=3),
        make_pair(question="Third question?", question_index=4),
        make_pair(question=q + "   ", question_index=5),
    ]
    kept, dropped = qagen.dedup_pairs(pairs)
    assert len(kept) == 3
    assert len(dropped) == 2
    assert kept[0].question_index == 1  # first occurrence wins


def test_dedup_all_distinct():
    pairs = [make_pair(question=f"Question number {i}?", question_index=i)
             for i in range(1, 6)]
    kept, dropped = qagen.dedup_pairs(pairs)
    assert len(kept) == 5 and dropped == []


def test_dedup_rejects_mixed_records():
    with pytest.raises(ValueError):
        qagen.dedup_pairs([make_pair(record_id="a"), make_pair(record_id="b")])
