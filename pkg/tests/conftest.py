from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from figqa.qagen import LETTERS, Option, QAPair
from figqa.hashing import content_id


def make_pair(record_id: str = "rec0001", question: str = "What does the arrow indicate?",
              option_texts: tuple[str, ...] = ("a lesion", "an artifact", "a catheter", "normal tissue"),
              answer_letter: str = "B", question_index: int = 1, **kwargs) -> QAPair:
    return QAPair(
        pair_id=content_id(record_id, question, *option_texts),
        record_id=record_id,
        question_index=question_index,
        question=question,
        options=tuple(Option(L, t) for L, t in zip(LETTERS, option_texts)),
        answer_letter=answer_letter,
        **kwargs,
    )


@pytest.fixture
def pair():
    return make_pair()


# acceptance tests append their result lines here; the summary hook prints
# them after the run, outside pytest's output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
