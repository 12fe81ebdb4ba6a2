"""Command-line entry point.

Stage subcommands mirror the pipeline DAG; `run-all` executes the whole
chain. Failures exit nonzero with a machine-readable JSON error on
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import metrics, pipeline, review
from .hashing import canonical_json

STAGE_COMMANDS = {
    "ingest": "ingest",
    "generate": "generate",
    "parse": "parse",
    "filter-text": "filter-text",
    "train-classifier": "train-classifier",
    "filter-classifier": "filter-classifier",
    "split": "split",
    "stats": "stats",
}


def _load_config(args) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig.load(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.run_seed = args.seed
    if getattr(args, "strict", False):
        cfg.strict = True
    return cfg


def _print_manifest(manifest: dict) -> None:
    status = "skipped" if manifest.get("skipped") else "ran"
    counts = manifest.get("counts", {})
    print(f"{manifest['stage']}: {status} "
          f"(in={counts.get('in', '?')} out={counts.get('out', '?')})")


def _cmd_stage(args) -> int:
    cfg = _load_config(args)
    _print_manifest(pipeline.run_stage(cfg, args.stage_name, force=args.force))
    return 0


def _cmd_run_all(args) -> int:
    cfg = _load_config(args)
    for manifest in pipeline.run_all(cfg, force=args.force):
        _print_manifest(manifest)
    return 0


def _cmd_eval(args) -> int:
    if args.gold and args.pred:
        gold = pipeline.load_pairs(Path(args.gold))
        preds = pipeline.load_predictions(Path(args.pred))
        report = metrics.eval_report(preds, gold, task=args.task,
                                     b=args.bootstrap, seed=args.seed or 0)
        out = Path(args.out) if args.out else None
        if out:
            pipeline.write_json(out, report)
        print(canonical_json({"task": report["task"], "acc": report["acc"],
                              "bleu1_corpus": report["bleu1"]["corpus"]}))
        return 0
    cfg = _load_config(args)
    _print_manifest(pipeline.run_stage(cfg, "eval", force=args.force))
    return 0


def _cmd_label_export(args) -> int:
    cfg = _load_config(args)
    store = review.load_store(
        cfg.path("split.json"), cfg.path("pairs.classified.jsonl"),
        Path(args.log) if args.log else cfg.path("review_verdicts.jsonl"),
        corpus_path=cfg.path("corpus.jsonl"))
    labels = store.export_labels()
    out = Path(args.out) if args.out else cfg.path("labels.jsonl")
    pipeline.write_jsonl(out, labels)
    print(f"label-export: wrote {len(labels)} labels to {out}")
    return 0


def _cmd_review_serve(args) -> int:
    import uvicorn

    cfg = _load_config(args)
    store = review.load_store(
        cfg.path("split.json"), cfg.path("pairs.classified.jsonl"),
        Path(args.log) if args.log else cfg.path("review_verdicts.jsonl"),
        corpus_path=cfg.path("corpus.jsonl"))
    static = Path(args.static) if args.static else None
    app = review.create_app(store, media_dir=cfg.media_dir, static_dir=static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="figqa",
                                     description="caption-driven VQA dataset pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default="figqa.toml", help="TOML config file")
        p.add_argument("--seed", type=int, default=None, help="override run_seed")
        p.add_argument("--strict", action="store_true")
        p.add_argument("--force", action="store_true", help="ignore stage manifests")

    for cmd in STAGE_COMMANDS:
        p = sub.add_parser(cmd, help=f"run the {cmd} stage")
        add_common(p)
        p.set_defaults(fn=_cmd_stage, stage_name=cmd)

    p = sub.add_parser("run-all", help="run every stage in order")
    add_common(p)
    p.set_defaults(fn=_cmd_run_all)

    p = sub.add_parser("eval", help="score a prediction file")
    add_common(p)
    p.add_argument("--task", choices=["choice", "blanking"], default="blanking")
    p.add_argument("--gold", help="gold split JSONL (standalone mode)")
    p.add_argument("--pred", help="prediction JSONL {pair_id, text}")
    p.add_argument("--bootstrap", type=int, default=1000, help="bootstrap resamples")
    p.add_argument("--out", help="write the full report here")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("label-export", help="export answerability labels from the verdict log")
    add_common(p)
    p.add_argument("--log", help="verdict log path")
    p.add_argument("--out", help="output labels JSONL")
    p.set_defaults(fn=_cmd_label_export)

    p = sub.add_parser("review-serve", help="serve the human review API and UI")
    add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--log", help="verdict log path")
    p.add_argument("--static", help="directory with the built review UI")
    p.set_defaults(fn=_cmd_review_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (pipeline.StageError, ValueError, FileNotFoundError) as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
