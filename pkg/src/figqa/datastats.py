"""Machine-readable dataset reports: question prefix trees, length
histograms, option balance, and pairs-per-image.

Tokenization comes from textnorm so the reports and the BLEU scorer
can never drift apart.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .qagen import LETTERS, QAPair
from .textnorm import tokenize


@dataclass
class PrefixNode:
    token: str
    count: int = 0
    terminal: int = 0  # questions ending exactly at this node
    children: dict[str, "PrefixNode"] = field(default_factory=dict)

    def to_dict(self) -> dict:
        # children sorted by count desc, token asc for determinism
        kids = sorted(self.children.values(), key=lambda c: (-c.count, c.token))
        return {
            "token": self.token,
            "count": self.count,
            "terminal": self.terminal,
            "children": [c.to_dict() for c in kids],
        }


def build_prefix_tree(questions: list[str], depth: int = 4) -> PrefixNode:
    """Count questions by their first `depth` tokens; shorter questions
    contribute their full length."""
    root = PrefixNode(token="", count=0)
    for q in questions:
        tokens = tokenize(q)[:depth]
        root.count += 1
        node = root
        for tok in tokens:
            child = node.children.get(tok)
            if child is None:
                child = node.children[tok] = PrefixNode(token=tok)
            child.count += 1
            node = child
        node.terminal += 1
    return root


def length_histograms(pairs: list[QAPair]) -> tuple[dict[int, float], dict[int, float]]:
    """Question and answer word-length histograms as percentages."""
    q_counts = Counter(len(tokenize(p.question)) for p in pairs)
    a_counts = Counter(len(tokenize(p.answer_text)) for p in pairs)

    def to_pct(counts: Counter) -> dict[int, float]:
        total = sum(counts.values())
        if total == 0:
            return {}
        return {k: 100.0 * v / total for k, v in sorted(counts.items())}

    return to_pct(q_counts), to_pct(a_counts)


def option_balance(pairs: list[QAPair]) -> dict[str, float]:
    """Exact fraction of gold answers per letter."""
    if not pairs:
        return {L: 0.0 for L in LETTERS}
    counts = Counter(p.answer_letter for p in pairs)
    return {L: counts.get(L, 0) / len(pairs) for L in LETTERS}


def pairs_per_image(pairs: list[QAPair]) -> float:
    images = {p.record_id for p in pairs}
    if not images:
        raise ValueError("no images in pair list")
    return len(pairs) / len(images)


def dataset_report(pairs: list[QAPair], prefix_depth: int = 4) -> dict:
    q_hist, a_hist = length_histograms(pairs)
    return {
        "pair_count": len(pairs),
        "image_count": len({p.record_id for p in pairs}),
        "question_length_histogram": {str(k): v for k, v in q_hist.items()},
        "answer_length_histogram": {str(k): v for k, v in a_hist.items()},
        "option_balance": option_balance(pairs),
        "pairs_per_image": pairs_per_image(pairs) if pairs else None,
        "top_first_words": build_prefix_tree([p.question for p in pairs], prefix_depth).to_dict(),
    }
