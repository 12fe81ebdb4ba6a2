"""HTTP service for the manual verification stage.

Annotators pull tasks, judge three criteria (image-answerable question,
adequate distractors, usable image quality), and submit a verdict whose
accept bit the server recomputes as the AND of the criteria. Persistence
is an append-only JSONL verdict log; replaying the log reconstructs the
full resolved state, so crashes lose nothing.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .hashing import canonical_json
from .pipeline import read_jsonl
from .qagen import QAPair
from .splitter import ReviewVerdictRecord, resolve_verdicts

CRITERIA = ("question_image_answerable", "distractors_adequate", "image_quality_ok")
DEFAULT_LEASE_SECONDS = 600


class VerdictBody(BaseModel):
    pair_id: str
    annotator: str
    criteria: dict[str, bool]
    accept: bool | None = None  # advisory; server recomputes


@dataclass
class _LoggedVerdict:
    pair_id: str
    annotator: str
    criteria: dict[str, bool]
    accept: bool
    timestamp: float
    seq: int

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "annotator": self.annotator,
            "criteria": self.criteria,
            "accept": self.accept,
            "timestamp": self.timestamp,
        }


class ReviewStore:
    """Verdict log plus in-memory lease and resolution index."""

    def __init__(self, candidates: list[str], pairs: dict[str, QAPair],
                 log_path: Path, lease_seconds: float = DEFAULT_LEASE_SECONDS,
                 clock=time.time, image_refs: dict[str, str] | None = None):
        self.candidates = list(candidates)
        self.pairs = pairs
        self.image_refs = image_refs or {}
        self.log_path = Path(log_path)
        self.lease_seconds = lease_seconds
        self.clock = clock
        self._lock = threading.Lock()
        self._leases: dict[str, tuple[str, float]] = {}  # pair_id -> (annotator, expires_at)
        self._verdicts: list[_LoggedVerdict] = []
        self._replay()

    def _replay(self) -> None:
        if not self.log_path.exists():
            return
        for i, d in enumerate(read_jsonl(self.log_path)):
            self._verdicts.append(_LoggedVerdict(
                d["pair_id"], d["annotator"], d["criteria"], d["accept"],
                d["timestamp"], seq=i))

    def _resolved_ids(self) -> set[str]:
        return {v.pair_id for v in self._verdicts}

    def next_task(self, annotator: str) -> dict | None:
        with self._lock:
            now = self.clock()
            resolved = self._resolved_ids()
            for pid in self.candidates:
                if pid in resolved:
                    continue
                lease = self._leases.get(pid)
                if lease is not None and lease[1] > now and lease[0] != annotator:
                    continue
                self._leases[pid] = (annotator, now + self.lease_seconds)
                pair = self.pairs[pid]
                record = pair.record_id
                return {
                    "pair_id": pid,
                    "record_id": record,
                    "image_url": f"/media/{self.image_refs.get(record, record)}",
                    "question": pair.question,
                    "options": [{"letter": o.letter, "text": o.text} for o in pair.options],
                    "answer_letter": pair.answer_letter,
                    "lease": {"annotator": annotator,
                              "expires_at": now + self.lease_seconds},
                }
            return None

    def submit(self, body: VerdictBody) -> dict:
        if body.pair_id not in self.pairs or body.pair_id not in self.candidates:
            raise KeyError(body.pair_id)
        missing = [c for c in CRITERIA if c not in body.criteria]
        if missing:
            raise ValueError(f"criteria incomplete: missing {', '.join(missing)}")
        criteria = {c: bool(body.criteria[c]) for c in CRITERIA}
        accept = all(criteria.values())  # authoritative, ignores the client claim
        with self._lock:
            verdict = _LoggedVerdict(
                pair_id=body.pair_id,
                annotator=body.annotator,
                criteria=criteria,
                accept=accept,
                timestamp=self.clock(),
                seq=len(self._verdicts),
            )
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.log_path, "a", encoding="utf-8") as f:
                f.write(canonical_json(verdict.to_dict()) + "\n")
            self._verdicts.append(verdict)
            self._leases.pop(body.pair_id, None)
            return verdict.to_dict()

    def _resolve(self, key) -> dict[str, bool]:
        records = [ReviewVerdictRecord(v.pair_id, v.annotator, key(v), v.timestamp, v.seq)
                   for v in self._verdicts]
        return resolve_verdicts(records)

    def progress(self) -> dict:
        with self._lock:
            resolution = self._resolve(lambda v: v.accept)
            resolved = [pid for pid in self.candidates if pid in resolution]
            accepted = sum(1 for pid in resolved if resolution[pid])
            return {
                "total": len(self.candidates),
                "resolved": len(resolved),
                "accepted": accepted,
                "retention_rate": accepted / len(resolved) if resolved else None,
            }

    def export_labels(self) -> list[dict]:
        """Answerability labels for classifier training: the image-answerable
        criterion, conflicts resolved like accept verdicts."""
        with self._lock:
            resolution = self._resolve(lambda v: v.criteria["question_image_answerable"])
            return [{"pair_id": pid, "label": 1 if resolution[pid] else 0}
                    for pid in self.candidates if pid in resolution]


def create_app(store: ReviewStore, media_dir: Path | None = None,
               static_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="figqa review service")
    app.state.store = store

    @app.get("/api/tasks/next")
    def next_task(annotator: str = Query(...)):
        task = store.next_task(annotator)
        if task is None:
            return JSONResponse({"done": True, "task": None})
        return {"done": False, "task": task}

    @app.post("/api/verdicts")
    def submit_verdict(body: VerdictBody):
        try:
            return store.submit(body)
        except KeyError:
            raise HTTPException(404, detail={"code": "unknown_pair",
                                             "message": f"{body.pair_id} is not a review candidate"})
        except ValueError as e:
            raise HTTPException(400, detail={"code": "bad_verdict", "message": str(e)})

    @app.get("/api/progress")
    def progress():
        return store.progress()

    @app.get("/api/export/labels")
    def export_labels():
        return store.export_labels()

    if media_dir is not None:
        media_root = Path(media_dir).resolve()

        @app.get("/media/{image_ref:path}")
        def media(image_ref: str):
            target = (media_root / image_ref).resolve()
            if media_root not in target.parents and target != media_root:
                raise HTTPException(404, detail={"code": "not_found", "message": "no such media"})
            if not target.is_file():
                raise HTTPException(404, detail={"code": "not_found", "message": "no such media"})
            return FileResponse(target)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def load_store(candidates_path: Path, pairs_path: Path, log_path: Path,
               lease_seconds: float = DEFAULT_LEASE_SECONDS, clock=time.time,
               corpus_path: Path | None = None) -> ReviewStore:
    """Build a store from stage files: the split's review candidates, the
    classified pair file, and (optionally) the corpus for image refs."""
    from .pipeline import load_pairs
    import json

    split = json.loads(Path(candidates_path).read_text(encoding="utf-8"))
    candidates = split["review_candidates"]
    pairs = {p.pair_id: p for p in load_pairs(pairs_path)}
    image_refs: dict[str, str] = {}
    if corpus_path is not None and Path(corpus_path).exists():
        image_refs = {d["record_id"]: d["image_ref"] for d in read_jsonl(Path(corpus_path))}
    return ReviewStore(candidates, pairs, log_path, lease_seconds, clock,
                       image_refs=image_refs)
