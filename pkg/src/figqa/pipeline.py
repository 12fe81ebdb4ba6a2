"""Stage orchestration: resumable, manifest-hashed pipeline steps.

Each stage reads stage files, writes stage files, and records a manifest
with content hashes of everything it touched. A stage whose inputs hash
the same as a previous run is skipped. Wall-clock time lives only in the
per-stage manifest files; the chain file (``manifests/chain.json``)
contains hashes and counts only, so two runs with the same config are
byte-identical artifact for artifact.
"""

from __future__ import annotations

import concurrent.futures
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, answerability, corpus, datastats, metrics, qagen, splitter, textfilter
from .hashing import canonical_json, file_sha256, sha256_hex, stable_seed

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

STAGES = [
    "ingest", "generate", "parse", "filter-text", "train-classifier",
    "filter-classifier", "split", "stats", "eval",
]


class StageError(Exception):
    pass


@dataclass
class PipelineConfig:
    run_seed: int = 0
    base_dir: Path = field(default_factory=Path.cwd)
    workdir: Path = Path("out")
    source: Path = Path("corpus_source.jsonl")
    media_dir: Path = Path("media")
    labels: Path | None = None
    predictions: Path | None = None
    review_verdicts: Path | None = None
    generation: dict = field(default_factory=dict)
    answerer: dict = field(default_factory=dict)
    budgets: splitter.Budgets = field(default_factory=splitter.Budgets)
    classifier: dict = field(default_factory=dict)
    bootstrap: dict = field(default_factory=dict)
    eval_task: str = "blanking"
    strict: bool = False

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        with open(path, "rb") as f:
            raw = tomllib.load(f)
        base = path.parent
        paths = raw.get("paths", {})

        def p(key, default=None):
            val = paths.get(key, "")
            if not val:
                return default
            return base / val

        budgets_raw = raw.get("budgets", {})
        return cls(
            run_seed=raw.get("run_seed", 0),
            base_dir=base,
            workdir=p("workdir", base / "out"),
            source=p("source", base / "corpus_source.jsonl"),
            media_dir=p("media_dir", base / "media"),
            labels=p("labels"),
            predictions=p("predictions"),
            review_verdicts=p("review_verdicts"),
            generation=raw.get("generation", {}),
            answerer=raw.get("answerer", {}),
            budgets=splitter.Budgets(
                test_pairs=budgets_raw.get("test_pairs", 50000),
                review_n=budgets_raw.get("review_n", 2000),
            ),
            classifier=raw.get("classifier", {}),
            bootstrap=raw.get("bootstrap", {}),
            eval_task=raw.get("eval", {}).get("task", "blanking"),
        )

    def config_fingerprint(self) -> str:
        payload = canonical_json({
            "run_seed": self.run_seed,
            "generation": self.generation,
            "answerer": self.answerer,
            "budgets": [self.budgets.test_pairs, self.budgets.review_n],
            "classifier": self.classifier,
            "bootstrap": self.bootstrap,
            "eval_task": self.eval_task,
        })
        return sha256_hex(payload.encode())

    def path(self, name: str) -> Path:
        return self.workdir / name


# ---------------------------------------------------------------------------
# jsonl helpers


def write_jsonl(path: Path, rows) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(canonical_json(row) + "\n")
            n += 1
    return n


def read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj) + "\n", encoding="utf-8")


def load_pairs(path: Path) -> list[qagen.QAPair]:
    return [qagen.QAPair.from_dict(d) for d in read_jsonl(path)]


def load_predictions(path: Path) -> dict[str, str]:
    preds: dict[str, str] = {}
    for row in read_jsonl(path):
        pid = row["pair_id"]
        if pid in preds:
            raise StageError(f"duplicate prediction for pair {pid}")
        preds[pid] = row["text"]
    return preds


# ---------------------------------------------------------------------------
# stage definitions

_STAGE_IO = {
    # stage -> (input logical names, output file names)
    "ingest": (["source"], ["corpus.jsonl", "corpus.manifest.json"]),
    "generate": (["corpus.jsonl"], ["generations.jsonl"]),
    "parse": (["generations.jsonl"], ["pairs.generated.jsonl", "parse_issues.jsonl"]),
    "filter-text": (["pairs.generated.jsonl"],
                    ["verdicts.textfilter.jsonl", "pairs.textfiltered.jsonl",
                     "filter_partition.json"]),
    "train-classifier": (["pairs.textfiltered.jsonl"],
                         ["labels.jsonl", "classifier.model.json"]),
    "filter-classifier": (["pairs.textfiltered.jsonl", "classifier.model.json"],
                          ["pairs.classified.jsonl"]),
    "split": (["pairs.classified.jsonl"],
              ["split.json", "train.jsonl", "test_initial.jsonl", "test_clean.jsonl"]),
    "stats": (["pairs.classified.jsonl"], ["report.json"]),
    "eval": (["test_initial.jsonl", "test_clean.jsonl", "split.json"], ["eval_report.json"]),
}


def _make_generation_client(cfg: PipelineConfig) -> qagen.GenerationClient:
    g = cfg.generation
    backend = g.get("backend", "mock")
    if backend == "mock":
        return qagen.MockGenerationClient(seed=g.get("seed", cfg.run_seed))
    if backend == "http":
        return qagen.HttpGenerationClient(
            base_url=g["base_url"], model=g.get("model", ""),
            api_key_env=g.get("api_key_env", ""), timeout=g.get("timeout", 60.0))
    raise StageError(f"unknown generation backend {backend!r}")


def _make_answerer(cfg: PipelineConfig) -> textfilter.Answerer:
    a = cfg.answerer
    backend = a.get("backend", "uniform")
    if backend == "uniform":
        return textfilter.UniformRandomAnswerer(seed=a.get("seed", cfg.run_seed))
    if backend == "constant":
        return textfilter.ConstantAnswerer(a.get("letter", "A"))
    if backend == "http":
        return textfilter.HttpAnswerer(a["url"], timeout=a.get("timeout", 30.0))
    raise StageError(f"unknown answerer backend {backend!r}")


def _stage_ingest(cfg: PipelineConfig) -> dict:
    fmt = "csv" if cfg.source.suffix.lower() == ".csv" else "jsonl"
    with open(cfg.source, "rb") as f:
        corp, issues = corpus.ingest(f, fmt)
    out = cfg.path("corpus.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(corpus.serialize_records(corp.records), encoding="utf-8")
    stats = corpus.corpus_stats(corp)
    write_json(cfg.path("corpus.manifest.json"), {
        "manifest_hash": corp.manifest_hash,
        "record_count": stats["record_count"],
        "caption_length_histogram": {str(k): v for k, v in stats["caption_length_histogram"].items()},
        "issues": [{"line": i.line, "kind": i.kind, "detail": i.detail} for i in issues],
    })
    return {"in": len(corp.records) + len(issues), "out": len(corp.records)}


def _stage_generate(cfg: PipelineConfig) -> dict:
    records = [corpus.ImageCaptionRecord(**d) for d in read_jsonl(cfg.path("corpus.jsonl"))]
    client = _make_generation_client(cfg)
    params = {"temperature": cfg.generation.get("temperature", 0.0),
              "max_tokens": cfg.generation.get("max_tokens", 1024)}
    max_retries = cfg.generation.get("max_retries", 3)
    workers = cfg.generation.get("concurrency", 8)

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
        gens = list(ex.map(
            lambda r: qagen.generate(client, r, params, max_retries=max_retries), records))
    # canonical record order regardless of completion order
    gens.sort(key=lambda g: g.record_id)
    n = write_jsonl(cfg.path("generations.jsonl"), (g.to_dict() for g in gens))
    return {"in": len(records), "out": n}


def _stage_parse(cfg: PipelineConfig) -> dict:
    gens = [qagen.RawGeneration.from_dict(d) for d in read_jsonl(cfg.path("generations.jsonl"))]
    all_pairs: list[qagen.QAPair] = []
    all_issues: list[qagen.ParseIssue] = []
    for gen in gens:
        if gen.failed:
            continue
        pairs, issues = qagen.parse_generation(gen)
        kept, _dropped = qagen.dedup_pairs(pairs)
        all_pairs.extend(kept)
        all_issues.extend(issues)
    all_pairs.sort(key=lambda p: (p.record_id, p.question_index, p.pair_id))
    write_jsonl(cfg.path("pairs.generated.jsonl"), (p.to_dict() for p in all_pairs))
    write_jsonl(cfg.path("parse_issues.jsonl"), (i.to_dict() for i in all_issues))
    return {"in": len(gens), "out": len(all_pairs)}


def _stage_filter_text(cfg: PipelineConfig) -> dict:
    pairs = load_pairs(cfg.path("pairs.generated.jsonl"))
    if not pairs:
        raise StageError("no pairs to filter")
    partition = textfilter.partition_for_filter(pairs, cfg.run_seed)
    write_json(cfg.path("filter_partition.json"), {
        "part_a": sorted(partition.part_a),
        "part_b": sorted(partition.part_b),
        "seed": partition.seed,
    })
    answerer = _make_answerer(cfg)
    ordered = sorted(pairs, key=lambda p: p.pair_id)
    verdicts = {p.pair_id: textfilter.run_trials(answerer, p, cfg.run_seed) for p in ordered}
    write_jsonl(cfg.path("verdicts.textfilter.jsonl"),
                (verdicts[p.pair_id].to_dict() for p in ordered))
    kept = textfilter.apply_filter(pairs, verdicts)
    write_jsonl(cfg.path("pairs.textfiltered.jsonl"), (p.to_dict() for p in kept))
    return {"in": len(pairs), "out": len(kept)}


def _weak_labels(pairs: list[qagen.QAPair], seed: int) -> list[answerability.LabeledPair]:
    # stand-in labels when no human export is configured: seeded, ~75% positive
    return [answerability.LabeledPair(p.pair_id,
                                      1 if stable_seed("weak-label", seed, p.question) % 4 else 0)
            for p in pairs]


def _stage_train_classifier(cfg: PipelineConfig) -> dict:
    pairs = load_pairs(cfg.path("pairs.textfiltered.jsonl"))
    by_id = {p.pair_id: p for p in pairs}

    if cfg.labels and cfg.labels.exists():
        labels = [answerability.LabeledPair(d["pair_id"], d["label"])
                  for d in read_jsonl(cfg.labels)]
        labels = [l for l in labels if l.pair_id in by_id]
    else:
        labels = _weak_labels(pairs, cfg.run_seed)
    if not labels:
        raise StageError("no usable labels for classifier training")
    write_jsonl(cfg.path("labels.jsonl"),
                ({"pair_id": l.pair_id, "label": l.label} for l in labels))

    c = cfg.classifier
    dimension = c.get("dimension", answerability.DIMENSION)
    include_options = c.get("include_options", True)
    hyper = answerability.Hyper(
        learning_rate=c.get("learning_rate", 0.5),
        l2_lambda=c.get("l2_lambda", 1e-4),
        epochs=c.get("epochs", 200),
        seed=cfg.run_seed,
    )
    featurized = [
        (answerability.featurize_pair(by_id[l.pair_id], dimension=dimension,
                                      include_options=include_options), l.label)
        for l in sorted(labels, key=lambda l: l.pair_id)
    ]
    n_train, n_test = answerability.split_protocol(len(featurized))
    import random as _random
    order = list(range(len(featurized)))
    _random.Random(stable_seed("label-split", cfg.run_seed)).shuffle(order)
    train_set = [featurized[i] for i in order[:n_train]]
    test_set = [featurized[i] for i in order[n_train:n_train + n_test]]

    model = answerability.train(train_set, hyper, dimension=dimension)
    if test_set:
        model.training_report["heldout_accuracy"] = answerability.evaluate(model, test_set)
    cfg.path("classifier.model.json").write_text(model.to_json() + "\n", encoding="utf-8")
    return {"in": len(labels), "out": 1}


def _stage_filter_classifier(cfg: PipelineConfig) -> dict:
    pairs = load_pairs(cfg.path("pairs.textfiltered.jsonl"))
    model = answerability.ClassifierModel.from_json(
        cfg.path("classifier.model.json").read_text(encoding="utf-8"))
    include_options = cfg.classifier.get("include_options", True)
    kept, telemetry = answerability.apply_classifier(
        pairs, model, threshold=cfg.classifier.get("threshold", 0.5),
        include_options=include_options)
    write_jsonl(cfg.path("pairs.classified.jsonl"), (p.to_dict() for p in kept))
    return {"in": len(pairs), "out": len(kept), "pairs_per_image": telemetry["pairs_per_image"]}


def _stage_split(cfg: PipelineConfig) -> dict:
    pairs = load_pairs(cfg.path("pairs.classified.jsonl"))
    assignment = splitter.split_train_test(pairs, cfg.budgets, cfg.run_seed)
    assignment = splitter.sample_for_review(assignment, cfg.run_seed)

    verdict_records: list[splitter.ReviewVerdictRecord] = []
    if cfg.review_verdicts and cfg.review_verdicts.exists():
        for i, d in enumerate(read_jsonl(cfg.review_verdicts)):
            verdict_records.append(splitter.ReviewVerdictRecord(
                d["pair_id"], d["annotator"], d["accept"], d["timestamp"], seq=i))
    assignment, _telemetry = splitter.finalize_clean_test(
        assignment, verdict_records, strict=cfg.strict and bool(verdict_records))

    write_json(cfg.path("split.json"), assignment.to_dict())
    by_id = {p.pair_id: p for p in pairs}
    from .qagen import Stage as S
    write_jsonl(cfg.path("train.jsonl"),
                (by_id[i].with_stage(S.TRAIN).to_dict() for i in sorted(assignment.train)))
    write_jsonl(cfg.path("test_initial.jsonl"),
                (by_id[i].with_stage(S.TEST_INITIAL).to_dict()
                 for i in sorted(assignment.test_initial)))
    write_jsonl(cfg.path("test_clean.jsonl"),
                (by_id[i].with_stage(S.TEST_CLEAN).to_dict()
                 for i in sorted(assignment.test_clean)))
    return {"in": len(pairs), "out": len(assignment.train) + len(assignment.test_initial)}


def _stage_stats(cfg: PipelineConfig) -> dict:
    pairs = load_pairs(cfg.path("pairs.classified.jsonl"))
    write_json(cfg.path("report.json"), datastats.dataset_report(pairs))
    return {"in": len(pairs), "out": 1}


def _stage_eval(cfg: PipelineConfig) -> dict:
    clean = load_pairs(cfg.path("test_clean.jsonl"))
    gold = clean if clean else load_pairs(cfg.path("test_initial.jsonl"))
    if not gold:
        raise StageError("no gold pairs available for eval")

    if cfg.predictions and cfg.predictions.exists():
        preds = load_predictions(cfg.predictions)
    else:
        # no prediction file configured: score a constant-A baseline
        preds = {p.pair_id: p.options[0].text for p in gold}
        write_jsonl(cfg.path("predictions.baseline.jsonl"),
                    ({"pair_id": k, "text": v} for k, v in sorted(preds.items())))

    report = metrics.eval_report(
        preds, gold, task=cfg.eval_task,
        b=cfg.bootstrap.get("B", 1000), alpha=cfg.bootstrap.get("alpha", 0.05),
        seed=cfg.bootstrap.get("seed", cfg.run_seed))
    write_json(cfg.path("eval_report.json"), report)
    return {"in": len(gold), "out": 1}


_STAGE_FNS = {
    "ingest": _stage_ingest,
    "generate": _stage_generate,
    "parse": _stage_parse,
    "filter-text": _stage_filter_text,
    "train-classifier": _stage_train_classifier,
    "filter-classifier": _stage_filter_classifier,
    "split": _stage_split,
    "stats": _stage_stats,
    "eval": _stage_eval,
}


# ---------------------------------------------------------------------------
# manifests and running


def _input_paths(cfg: PipelineConfig, stage: str) -> dict[str, Path]:
    names, _ = _STAGE_IO[stage]
    out = {}
    for name in names:
        if name == "source":
            out["source"] = cfg.source
        else:
            out[name] = cfg.path(name)
    return out


def _manifest_path(cfg: PipelineConfig, stage: str) -> Path:
    return cfg.workdir / "manifests" / f"{stage}.json"


def _hash_outputs(cfg: PipelineConfig, stage: str) -> dict[str, str]:
    _, outs = _STAGE_IO[stage]
    hashes = {}
    for name in outs:
        p = cfg.path(name)
        if p.exists():
            hashes[name] = file_sha256(p)
    # the eval stage may emit a baseline prediction file as a side output
    return hashes


def run_stage(cfg: PipelineConfig, stage: str, force: bool = False) -> dict:
    """Execute one stage, or skip it when input hashes match a previous
    manifest and the outputs are intact. Returns the manifest dict."""
    if stage not in _STAGE_FNS:
        raise StageError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")

    inputs = _input_paths(cfg, stage)
    missing = [str(p) for p in inputs.values() if not p.exists()]
    if missing:
        raise StageError(f"stage {stage} missing inputs: {', '.join(missing)}")

    input_hashes = {name: file_sha256(p) for name, p in inputs.items()}
    input_hashes["config"] = cfg.config_fingerprint()

    mpath = _manifest_path(cfg, stage)
    if not force and mpath.exists():
        prev = json.loads(mpath.read_text(encoding="utf-8"))
        if (prev.get("input_hashes") == input_hashes
                and prev.get("output_hashes") == _hash_outputs(cfg, stage)
                and prev.get("output_hashes")):
            prev["skipped"] = True
            return prev

    started = time.monotonic()
    counts = _STAGE_FNS[stage](cfg)
    wall_ms = int((time.monotonic() - started) * 1000)

    manifest = {
        "stage": stage,
        "input_hashes": input_hashes,
        "output_hashes": _hash_outputs(cfg, stage),
        "counts": counts,
        "tool_version": __version__,
        "wall_time_ms": wall_ms,
    }
    mpath.parent.mkdir(parents=True, exist_ok=True)
    mpath.write_text(canonical_json(manifest) + "\n", encoding="utf-8")
    _write_chain(cfg)
    return manifest


def _write_chain(cfg: PipelineConfig) -> None:
    """Rebuild the chain file: per-stage hashes and counts, no timings."""
    chain = []
    for stage in STAGES:
        mpath = _manifest_path(cfg, stage)
        if not mpath.exists():
            continue
        m = json.loads(mpath.read_text(encoding="utf-8"))
        chain.append({
            "stage": m["stage"],
            "input_hashes": m["input_hashes"],
            "output_hashes": m["output_hashes"],
            "counts": m["counts"],
            "tool_version": m["tool_version"],
        })
    write_json(cfg.workdir / "manifests" / "chain.json", chain)


def run_all(cfg: PipelineConfig, force: bool = False) -> list[dict]:
    """Run every stage in dependency order; stop at the first error,
    leaving prior manifests intact."""
    manifests = []
    for stage in STAGES:
        manifests.append(run_stage(cfg, stage, force=force))
    return manifests
