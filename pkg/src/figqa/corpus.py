"""Ingest and index image-caption source records.

Media bytes are never touched here; image_ref is validated only as a
nonempty string. The corpus is the deterministic root of the pipeline:
records are kept in canonical (record_id) order and the manifest hash is
computed over the canonical JSONL serialization.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable

from .hashing import canonical_json, sha256_hex

FIELDS = ("record_id", "source_id", "image_ref", "caption", "license_tag")


class IngestError(Exception):
    """Fatal ingest failure (undecodable stream, unknown format)."""


@dataclass(frozen=True)
class ImageCaptionRecord:
    record_id: str
    source_id: str
    image_ref: str
    caption: str
    license_tag: str

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "source_id": self.source_id,
            "image_ref": self.image_ref,
            "caption": self.caption,
            "license_tag": self.license_tag,
        }


@dataclass(frozen=True)
class RowIssue:
    line: int
    kind: str
    detail: str


@dataclass(frozen=True)
class Corpus:
    records: tuple[ImageCaptionRecord, ...]
    manifest_hash: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def _make_corpus(records: Iterable[ImageCaptionRecord]) -> Corpus:
    ordered = tuple(sorted(records, key=lambda r: r.record_id))
    payload = serialize_records(ordered)
    return Corpus(records=ordered, manifest_hash=sha256_hex(payload.encode("utf-8")))


def serialize_records(records: Iterable[ImageCaptionRecord]) -> str:
    """Canonical JSONL form; ingest(serialize(c)) round-trips."""
    return "".join(canonical_json(r.to_dict()) + "\n" for r in records)


def _validate_row(row: dict, line: int, seen: set[str]) -> tuple[ImageCaptionRecord | None, RowIssue | None]:
    missing = [f for f in FIELDS if f not in row or row[f] is None]
    if missing:
        return None, RowIssue(line, "missing_field", f"missing {', '.join(missing)}")
    rec_id = str(row["record_id"]).strip()
    if not rec_id:
        return None, RowIssue(line, "empty_record_id", "record_id empty")
    if rec_id in seen:
        return None, RowIssue(line, "duplicate_id", f"duplicate record_id {rec_id!r}")
    caption = str(row["caption"])
    if not caption.strip():
        return None, RowIssue(line, "empty_caption", f"empty caption for {rec_id!r}")
    image_ref = str(row["image_ref"])
    if not image_ref:
        return None, RowIssue(line, "empty_image_ref", f"empty image_ref for {rec_id!r}")
    seen.add(rec_id)
    rec = ImageCaptionRecord(
        record_id=rec_id,
        source_id=str(row["source_id"]),
        image_ref=image_ref,
        caption=caption,
        license_tag=str(row["license_tag"]),
    )
    return rec, None


def ingest(stream: BinaryIO, fmt: str = "jsonl") -> tuple[Corpus, list[RowIssue]]:
    """Parse a JSONL or CSV byte stream into a Corpus.

    Per-row problems (bad JSON, missing fields, duplicate ids, empty
    captions) are collected as issues; only an undecodable stream or an
    unknown format is fatal.
    """
    raw = stream.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise IngestError(f"stream is not valid UTF-8: {e}") from e

    records: list[ImageCaptionRecord] = []
    issues: list[RowIssue] = []
    seen: set[str] = set()

    if fmt == "jsonl":
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                issues.append(RowIssue(line_no, "bad_json", str(e)))
                continue
            if not isinstance(row, dict):
                issues.append(RowIssue(line_no, "bad_json", "row is not an object"))
                continue
            rec, issue = _validate_row(row, line_no, seen)
            if rec is not None:
                records.append(rec)
            if issue is not None:
                issues.append(issue)
    elif fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            raise IngestError("CSV stream has no header row")
        for line_no, row in enumerate(reader, start=2):
            rec, issue = _validate_row(row, line_no, seen)
            if rec is not None:
                records.append(rec)
            if issue is not None:
                issues.append(issue)
    else:
        raise IngestError(f"unknown format {fmt!r}")

    return _make_corpus(records), issues


def corpus_stats(corpus: Corpus) -> dict:
    """Record count plus a caption-length histogram (whitespace tokens)."""
    hist = Counter(len(r.caption.split()) for r in corpus.records)
    return {
        "record_count": len(corpus.records),
        "caption_length_histogram": dict(sorted(hist.items())),
    }
