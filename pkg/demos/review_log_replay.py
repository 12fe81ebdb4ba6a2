"""Human review session without the HTTP layer: leases, verdicts, conflict
resolution, and crash recovery by replaying the append-only log.

The store keeps no database — every verdict is one canonical-JSON line in a
log file, and the full review state is a fold over that log.  Killing the
process loses nothing: a new store pointed at the same log reconstructs the
identical state.
"""

import tempfile
from pathlib import Path

from figqa.qagen import Option, QAPair, Stage
from figqa.review import CRITERIA, ReviewStore, VerdictBody


def make_pair(n: int) -> QAPair:
    texts = [f"reading {j} in panel {n}" for j in range(4)]
    return QAPair(
        pair_id=f"pair{n:04d}", record_id=f"rec{n:04d}", question_index=1,
        question=f"What is shown in panel {n}?",
        options=tuple(Option(l, t) for l, t in zip("ABCD", texts)),
        answer_letter="B", stage=Stage.REVIEW_CANDIDATE)


def verdict(pair_id: str, annotator: str, *answers: bool) -> VerdictBody:
    return VerdictBody(pair_id=pair_id, annotator=annotator,
                       criteria=dict(zip(CRITERIA, answers)),
                       accept=all(answers))


def main() -> None:
    pairs = {p.pair_id: p for p in (make_pair(i) for i in range(4))}
    log = Path(tempfile.mkstemp(suffix=".jsonl")[1])
    store = ReviewStore(sorted(pairs), pairs, log, clock=lambda: 1000.0)

    print("== leasing ==")
    task = store.next_task("alice")
    print(f"  alice gets {task['pair_id']} (lease until {task['lease']['expires_at']})")
    task_b = store.next_task("bob")
    print(f"  bob gets a different pair: {task_b['pair_id']}")

    print("\n== verdicts ==")
    # clean accept and clean reject
    store.submit(verdict("pair0000", "alice", True, True, True))
    store.submit(verdict("pair0001", "bob", True, False, True))
    # two annotators disagree on the same pair: strict majority needed,
    # a 1-1 tie resolves to reject
    store.submit(verdict("pair0002", "alice", True, True, True))
    store.submit(verdict("pair0002", "bob", False, True, True))
    # an annotator changes their mind: only their latest verdict counts
    store.submit(verdict("pair0003", "alice", False, False, False))
    store.submit(verdict("pair0003", "alice", True, True, True))
    progress = store.progress()
    print(f"  progress: {progress}")
    print(f"  tie on pair0002 rejected, revised pair0003 accepted -> "
          f"{progress['accepted']}/{progress['resolved']} kept")

    print("\n== answerability labels for classifier training ==")
    for row in store.export_labels():
        print(f"  {row['pair_id']}: label {row['label']}")

    print("\n== crash recovery: replay the log into a fresh store ==")
    replayed = ReviewStore(sorted(pairs), pairs, log, clock=lambda: 2000.0)
    same = replayed.progress() == store.progress()
    print(f"  log lines: {sum(1 for _ in open(log))}")
    print(f"  replayed progress identical: {same}")
    log.unlink()


if __name__ == "__main__":
    main()
