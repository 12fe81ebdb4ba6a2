import io

import pytest

from figqa import corpus


def jsonl_stream(*rows: str) -> io.BytesIO:
    return io.BytesIO(("\n".join(rows) + "\n").encode("utf-8"))


ROW = '{{"record_id":"{rid}","source_id":"s1","image_ref":"img/{rid}.jpg","caption":"{cap}","license_tag":"cc-by"}}'


def test_ingest_well_formed_jsonl():
    stream = jsonl_stream(
        ROW.format(rid="r1", cap="CT of the abdomen"),
        ROW.format(rid="r2", cap="MRI of the brain"),
        ROW.format(rid="r3", cap="Chest x-ray"),
    )
    corp, issues = corpus.ingest(stream)
    assert len(corp) == 3
    assert issues == []
    assert [r.record_id for r in corp] == ["r1", "r2", "r3"]


def test_empty_caption_dropped_with_issue():
    corp, issues = corpus.ingest(jsonl_stream(ROW.format(rid="r1", cap="   ")))
    assert len(corp) == 0
    assert len(issues) == 1
    assert issues[0].kind == "empty_caption"


def test_duplicate_record_id_keeps_first():
    corp, issues = corpus.ingest(jsonl_stream(
        ROW.format(rid="r1", cap="first caption"),
        ROW.format(rid="r1", cap="second caption"),
    ))
    assert len(corp) == 1
    assert corp.records[0].caption == "first caption"
    assert [i.kind for i in issues] == ["duplicate_id"]


def test_undecodable_stream_is_fatal():
    with pytest.raises(corpus.IngestError):
        corpus.ingest(io.BytesIO(b"\xff\xfe\x00bad"))


def test_csv_ingest():
    csv_text = (
        "record_id,source_id,image_ref,caption,license_tag\n"
        'r2,s,b.jpg,"a caption, with a comma",cc\n'
        "r1,s,a.jpg,plain caption,cc\n"
    )
    corp, issues = corpus.ingest(io.BytesIO(csv_text.encode()), "csv")
    assert issues == []
    assert [r.record_id for r in corp] == ["r1", "r2"]
    assert corp.records[1].caption == "a caption, with a comma"


def test_records_sorted_canonically_and_hash_deterministic():
    rows = [ROW.format(rid=f"r{i}", cap=f"caption {i}") for i in (3, 1, 2)]
    corp1, _ = corpus.ingest(jsonl_stream(*rows))
    corp2, _ = corpus.ingest(jsonl_stream(*rows))
    assert [r.record_id for r in corp1] == ["r1", "r2", "r3"]
    assert corp1.manifest_hash == corp2.manifest_hash


def test_serialize_round_trip():
    corp, _ = corpus.ingest(jsonl_stream(
        ROW.format(rid="r1", cap="CT of the abdomen"),
        ROW.format(rid="r2", cap="MRI of the brain"),
    ))
    text = corpus.serialize_records(corp.records)
    corp2, issues = corpus.ingest(io.BytesIO(text.encode()))
    assert issues == []
    assert corp2 == corp
    assert corp2.manifest_hash == corp.manifest_hash


def test_corpus_stats_empty():
    corp, _ = corpus.ingest(io.BytesIO(b""))
    stats = corpus.corpus_stats(corp)
    assert stats == {"record_count": 0, "caption_length_histogram": {}}


def test_corpus_stats_histogram():
    corp, _ = corpus.ingest(jsonl_stream(
        ROW.format(rid="r1", cap="one two three"),
        ROW.format(rid="r2", cap="a b c d e"),
    ))
    stats = corpus.corpus_stats(corp)
    assert stats["record_count"] == 2
    assert stats["caption_length_histogram"] == {3: 1, 5: 1}


def test_large_fixture_count():
    # synthetic generator emits a known record count
    n = 381_000
    records = (corpus.ImageCaptionRecord(f"r{i:07d}", "s", f"{i}.jpg", "cap text", "cc")
               for i in range(n))
    corp = corpus._make_corpus(records)
    assert corpus.corpus_stats(corp)["record_count"] == n
