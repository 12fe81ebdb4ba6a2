"""Question-answer generation: prompt construction, backend clients, and
parsing of the templated output into validated pairs.

The parser is total: any byte soup becomes (pairs, issues), never an
exception. Strictness lives in block structure; lexing of labels is
tolerant of case and whitespace because LLM outputs drift.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Protocol

import requests

from .corpus import ImageCaptionRecord
from .hashing import content_id, stable_seed
from .textnorm import normalize_question

PROMPT_INSTRUCTION = (
    "Ask 5 questions about the content and generate four options for each "
    "question. The questions should be answerable with the information "
    "provided in the caption, and the four options should include one "
    "correct and three incorrect options, with the position of the correct "
    "option randomized. The output should use the following template: "
    "i:`the question index' question:`the generate question' choice: "
    "`A:option content B:option content C:option content D:option content' "
    "answer: The correct option(A\\B\\C\\D)."
)

LETTERS = ("A", "B", "C", "D")


class Stage(str, Enum):
    GENERATED = "generated"
    KEPT_BY_TEXT_FILTER = "kept_by_text_filter"
    KEPT_BY_CLASSIFIER = "kept_by_classifier"
    TRAIN = "train"
    TEST_INITIAL = "test_initial"
    REVIEW_CANDIDATE = "review_candidate"
    TEST_CLEAN = "test_clean"
    REJECTED = "rejected"


# stage may only advance along this order
STAGE_ORDER = {s: i for i, s in enumerate(Stage)}


@dataclass(frozen=True)
class Option:
    letter: str
    text: str


@dataclass(frozen=True)
class QAPair:
    pair_id: str
    record_id: str
    question_index: int
    question: str
    options: tuple[Option, ...]
    answer_letter: str
    stage: Stage = Stage.GENERATED
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        letters = tuple(o.letter for o in self.options)
        if letters != LETTERS:
            raise ValueError(f"options must carry letters A-D in order, got {letters}")
        if self.answer_letter not in LETTERS:
            raise ValueError(f"bad answer letter {self.answer_letter!r}")
        if not self.question.strip():
            raise ValueError("question empty")
        for o in self.options:
            if not o.text.strip():
                raise ValueError(f"option {o.letter} empty")

    @property
    def answer_text(self) -> str:
        return self.options[LETTERS.index(self.answer_letter)].text

    def with_stage(self, stage: Stage) -> "QAPair":
        return replace(self, stage=stage)

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "record_id": self.record_id,
            "question_index": self.question_index,
            "question": self.question,
            "options": [{"letter": o.letter, "text": o.text} for o in self.options],
            "answer_letter": self.answer_letter,
            "stage": self.stage.value,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QAPair":
        return cls(
            pair_id=d["pair_id"],
            record_id=d["record_id"],
            question_index=d["question_index"],
            question=d["question"],
            options=tuple(Option(o["letter"], o["text"]) for o in d["options"]),
            answer_letter=d["answer_letter"],
            stage=Stage(d["stage"]),
            flags=tuple(d.get("flags", ())),
        )


@dataclass(frozen=True)
class ParseIssue:
    record_id: str
    span: tuple[int, int]  # byte offsets into response_text
    kind: str  # no_blocks | missing_field | missing_option | bad_answer_letter | duplicate_block | refusal_text
    detail: str

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "span": list(self.span),
            "kind": self.kind,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class RawGeneration:
    record_id: str
    backend_id: str
    response_text: str
    request_fingerprint: str
    failed: bool = False
    retries: int = 0

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "backend_id": self.backend_id,
            "response_text": self.response_text,
            "request_fingerprint": self.request_fingerprint,
            "failed": self.failed,
            "retries": self.retries,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RawGeneration":
        return cls(
            record_id=d["record_id"],
            backend_id=d["backend_id"],
            response_text=d["response_text"],
            request_fingerprint=d["request_fingerprint"],
            failed=d.get("failed", False),
            retries=d.get("retries", 0),
        )


def build_prompt(caption: str) -> str:
    """Verbatim generation instruction followed by the caption."""
    if not caption.strip():
        raise ValueError("caption must be nonempty")
    return PROMPT_INSTRUCTION + "\n" + caption


# ---------------------------------------------------------------------------
# generation clients


class TransportError(Exception):
    """Transient transport failure; generate() retries these."""


class GenerationClient(Protocol):
    backend_id: str

    def complete(self, prompt: str, params: dict) -> str: ...


class HttpGenerationClient:
    """Chat-completion style HTTP JSON backend.

    POSTs {model, temperature, max_tokens, messages:[{role,content}]} and
    expects {choices:[{message:{content}}]}. The API key comes from the
    environment variable named in the config, never from the config file.
    """

    def __init__(self, base_url: str, model: str, api_key_env: str = "", timeout: float = 60.0):
        self.base_url = base_url
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.backend_id = f"http:{model}"

    def complete(self, prompt: str, params: dict) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.model,
            "temperature": params.get("temperature", 0.0),
            "max_tokens": params.get("max_tokens", 1024),
            "messages": [{"role": "user", "content": prompt}],
        }
        try:
            resp = requests.post(self.base_url, json=body, headers=headers, timeout=self.timeout)
        except requests.RequestException as e:
            raise TransportError(str(e)) from e
        if resp.status_code >= 500:
            raise TransportError(f"server error {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise TransportError(f"malformed response envelope: {e}") from e


_MOCK_SUBJECTS = ["structure", "finding", "region", "feature", "pattern"]
_MOCK_DISTRACTORS = [
    "normal appearance", "diffuse enhancement", "focal lesion", "mild atrophy",
    "cystic change", "calcification", "edema", "hemorrhage", "fibrosis",
    "no abnormality",
]


class MockGenerationClient:
    """Deterministic template-conformant backend for offline runs.

    Output depends only on (seed, record_id, caption); a small seeded
    fraction of responses carry a duplicated question so downstream
    dedup has work to do.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.backend_id = f"mock:{seed}"

    def complete(self, prompt: str, params: dict) -> str:
        import random

        caption = prompt.split("\n", 1)[1] if "\n" in prompt else prompt
        rng = random.Random(stable_seed("mockgen", self.seed, caption))
        cap_words = caption.split()
        blocks = []
        questions = []
        for i in range(1, 6):
            if i > 1 and rng.random() < 0.08:
                q = questions[rng.randrange(len(questions))]  # seeded duplicate
            else:
                subject = rng.choice(_MOCK_SUBJECTS)
                anchor = rng.choice(cap_words) if cap_words else "image"
                q = f"Which {subject} is described in relation to {anchor}?"
            questions.append(q)
            correct = rng.choice(_MOCK_DISTRACTORS)
            wrong = rng.sample([d for d in _MOCK_DISTRACTORS if d != correct], 3)
            opts = wrong[:]
            gold_pos = rng.randrange(4)
            opts.insert(gold_pos, correct)
            gold_letter = LETTERS[gold_pos]
            blocks.append(
                f"i:{i} question:{q} choice: "
                f"A:{opts[0]} B:{opts[1]} C:{opts[2]} D:{opts[3]} "
                f"answer: The correct option({gold_letter})."
            )
        return "\n".join(blocks)


def generate(
    client: GenerationClient,
    record: ImageCaptionRecord,
    params: dict | None = None,
    max_retries: int = 3,
    sleep: Callable[[float], None] = time.sleep,
) -> RawGeneration:
    """One generation per record, with exponential backoff on transport
    failures. A permanently failing backend yields a failure-marked
    RawGeneration so the pipeline can continue."""
    params = dict(params or {})
    prompt = build_prompt(record.caption)
    fingerprint = content_id(prompt, client.backend_id, json.dumps(params, sort_keys=True))
    retries = 0
    while True:
        try:
            text = client.complete(prompt, params)
            return RawGeneration(record.record_id, client.backend_id, text, fingerprint, retries=retries)
        except TransportError:
            if retries >= max_retries:
                return RawGeneration(record.record_id, client.backend_id, "", fingerprint,
                                     failed=True, retries=retries)
            sleep(min(2.0 ** retries, 30.0))
            retries += 1


# ---------------------------------------------------------------------------
# parsing

_BLOCK_SPLIT = re.compile(r"(?=\bi\s*:\s*\d)", re.IGNORECASE)
_IDX_RE = re.compile(r"\bi\s*:\s*(\d+)", re.IGNORECASE)
_QUESTION_RE = re.compile(r"\bquestion\s*:\s*(.*?)\s*(?=\bchoice\s*:|\banswer\s*:|$)",
                          re.IGNORECASE | re.DOTALL)
_CHOICE_RE = re.compile(r"\bchoice\s*:\s*(.*?)\s*(?=\banswer\s*:|$)", re.IGNORECASE | re.DOTALL)
_ANSWER_RE = re.compile(r"\banswer\s*:\s*(.*?)\s*$", re.IGNORECASE | re.DOTALL)
_OPTIONS_RE = re.compile(
    r"A\s*:\s*(?P<A>.*?)\s*B\s*:\s*(?P<B>.*?)\s*C\s*:\s*(?P<C>.*?)\s*D\s*:\s*(?P<D>.*?)\s*$",
    re.DOTALL,
)
_REFUSAL_RE = re.compile(
    r"\b(sorry|cannot|can't|unable|i am an ai|as an ai|refuse)\b", re.IGNORECASE
)


def _byte_span(text: str, start: int, end: int) -> tuple[int, int]:
    return (len(text[:start].encode("utf-8")), len(text[:end].encode("utf-8")))


def _extract_answer_letter(ans_text: str) -> str | None:
    stripped = ans_text.strip().strip("`'\".()")
    if len(stripped) == 1 and stripped.upper() in LETTERS:
        return stripped.upper()
    found = set(re.findall(r"\b([A-D])\b", ans_text))
    if len(found) == 1:
        return found.pop()
    return None


def parse_generation(gen: RawGeneration) -> tuple[list[QAPair], list[ParseIssue]]:
    """Parse templated blocks out of a raw response.

    Recognizes up to 5 blocks of the form
    ``i:<n> question:<text> choice: A:<t> B:<t> C:<t> D:<t> answer:<letter>``.
    Incomplete blocks become issues, never partial pairs.
    """
    text = gen.response_text
    rid = gen.record_id
    pairs: list[QAPair] = []
    issues: list[ParseIssue] = []

    chunks: list[tuple[int, str]] = []
    pos = 0
    parts = _BLOCK_SPLIT.split(text)
    for part in parts:
        if _IDX_RE.match(part.lstrip()) or _IDX_RE.match(part):
            chunks.append((pos, part))
        pos += len(part)
    # keep only parts that actually start with an index label
    chunks = [(off, c) for off, c in chunks if _IDX_RE.match(c)]

    if not chunks:
        if text.strip() and _REFUSAL_RE.search(text):
            issues.append(ParseIssue(rid, _byte_span(text, 0, len(text)), "refusal_text",
                                     "response looks like a refusal"))
        else:
            issues.append(ParseIssue(rid, (0, len(text.encode("utf-8"))), "no_blocks",
                                     "no template blocks found"))
        return pairs, issues

    seen_indices: set[int] = set()
    for off, chunk in chunks:
        span = _byte_span(text, off, off + len(chunk))
        idx_m = _IDX_RE.match(chunk)
        q_index = int(idx_m.group(1))

        if len(pairs) >= 5:
            issues.append(ParseIssue(rid, span, "duplicate_block",
                                     "block beyond the requested 5 ignored"))
            continue
        if q_index in seen_indices:
            issues.append(ParseIssue(rid, span, "duplicate_block",
                                     f"question index {q_index} repeated"))
            continue

        q_m = _QUESTION_RE.search(chunk)
        if not q_m or not q_m.group(1).strip():
            issues.append(ParseIssue(rid, span, "missing_field", "no question field"))
            continue
        c_m = _CHOICE_RE.search(chunk)
        if not c_m:
            issues.append(ParseIssue(rid, span, "missing_field", "no choice field"))
            continue
        a_m = _ANSWER_RE.search(chunk)
        if not a_m:
            issues.append(ParseIssue(rid, span, "missing_field", "no answer field"))
            continue

        opt_m = _OPTIONS_RE.match(c_m.group(1).strip())
        if not opt_m or any(not opt_m.group(L).strip() for L in LETTERS):
            present = [L for L in LETTERS if re.search(rf"\b{L}\s*:", c_m.group(1))]
            missing = [L for L in LETTERS if L not in present]
            issues.append(ParseIssue(rid, span, "missing_option",
                                     f"options missing or empty: {','.join(missing) or '?'}"))
            continue

        letter = _extract_answer_letter(a_m.group(1))
        if letter is None:
            issues.append(ParseIssue(rid, span, "bad_answer_letter",
                                     f"cannot extract a single letter from {a_m.group(1)!r:.60}"))
            continue

        question = " ".join(q_m.group(1).split())
        option_texts = [" ".join(opt_m.group(L).split()) for L in LETTERS]
        options = tuple(Option(L, t) for L, t in zip(LETTERS, option_texts))
        flags = ()
        if len(set(option_texts)) < 4:
            # distractor quality is judged by humans later; keep but flag
            flags = ("indistinct_options",)
        pair_id = content_id(rid, question, *option_texts)
        seen_indices.add(q_index)
        pairs.append(QAPair(
            pair_id=pair_id,
            record_id=rid,
            question_index=q_index,
            question=question,
            options=options,
            answer_letter=letter,
            flags=flags,
        ))

    return pairs, issues


def render_pairs(pairs: list[QAPair]) -> str:
    """Emit the exact output template; parse(render(pairs)) == pairs."""
    blocks = []
    for p in pairs:
        opts = " ".join(f"{o.letter}:{o.text}" for o in p.options)
        blocks.append(f"i:{p.question_index} question:{p.question} choice: {opts} "
                      f"answer: The correct option({p.answer_letter}).")
    return "\n".join(blocks)


def dedup_pairs(pairs: list[QAPair]) -> tuple[list[QAPair], list[QAPair]]:
    """Drop repeats of the same normalized question within one record;
    first occurrence wins."""
    if len({p.record_id for p in pairs}) > 1:
        raise ValueError("dedup_pairs expects pairs from a single record")
    kept: list[QAPair] = []
    dropped: list[QAPair] = []
    seen: set[str] = set()
    for p in pairs:
        key = normalize_question(p.question)
        if key in seen:
            dropped.append(p)
        else:
            seen.add(key)
            kept.append(p)
    return kept, dropped
