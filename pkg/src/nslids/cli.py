"""Command-line interface: ``nslids prepare|train|eval|score|report``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .artifact import EncodedCache, ModelArtifact
from .dataset import parse_line
from .errors import DataError, NslIdsError, TrainingError
from .evaluation import EvalReport, evaluate, render_report
from .pipeline import (
    PipelineConfig,
    coerce_value,
    format_summary,
    parse_config_file,
    prepare,
    stage,
    train_model,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAINING = 0, 1, 2, 3
CACHE_NAME = "prepared.npz"
PREPARE_META = "prepared.json"

log = logging.getLogger("nslids")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration (flags override --config)")
    g.add_argument("--config", help="flat key = value configuration file")
    g.add_argument("--train-path")
    g.add_argument("--test-path")
    g.add_argument("--k", type=float, help="outlier threshold in MADs (default 10)")
    g.add_argument("--c", type=float, help="MAD consistency constant (default 1.4826)")
    g.add_argument("--zero-ratio-threshold", type=float)
    g.add_argument("--code-sizes", help="comma-separated autoencoder code sizes, e.g. 50,25,12")
    g.add_argument("--pretrain-iters", type=int)
    g.add_argument("--finetune-iters", type=int)
    g.add_argument("--head-iters", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--model", choices=["ae", "mlp"])
    g.add_argument("--out-dir")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nslids", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="filter, select features and encode both splits")
    _config_flags(p)

    p = sub.add_parser("train", help="train a classifier and write a model artifact")
    _config_flags(p)
    p.add_argument("--artifact", help="output path (default: <out-dir>/model-<tag>.json)")

    p = sub.add_parser("eval", help="evaluate an artifact on the prepared test split")
    p.add_argument("--artifact", required=True)
    p.add_argument("--out-dir", default=None, help="directory holding the prepared cache")
    p.add_argument("--cache", help="explicit path of the encoded cache")
    p.add_argument("--report", help="JSON report path (default: beside the artifact)")

    p = sub.add_parser("score", help="classify raw NSL-KDD lines")
    p.add_argument("--artifact", required=True)
    p.add_argument("input", nargs="?", default="-", help="input file, '-' for stdin")

    p = sub.add_parser("report", help="render tables from JSON evaluation reports")
    p.add_argument("reports", nargs="+")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    values: dict = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for key in ("train_path", "test_path", "k", "c", "zero_ratio_threshold", "code_sizes",
                "pretrain_iters", "finetune_iters", "head_iters", "seed", "model", "out_dir"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = coerce_value(key, v) if isinstance(v, str) else v
    return PipelineConfig(**values)


def _cache_paths(out_dir: Path) -> tuple[Path, Path]:
    return out_dir / CACHE_NAME, out_dir / PREPARE_META


def run_prepare(config: PipelineConfig, out: TextIO) -> EncodedCache:
    prepared = prepare(config)
    cache = EncodedCache(prepared.X_train, prepared.y_train, prepared.X_test, prepared.y_test,
                         prepared.schema.digest())
    cache_path, meta_path = _cache_paths(config.out)
    with stage("write cache"):
        cache.save(cache_path)
        meta_path.write_text(json.dumps({
            "prepare_config": config.prepare_dict(),
            "schema_hash": cache.schema_hash,
            "schema": prepared.schema.to_dict(),
            "summary": prepared.summary,
        }, indent=1) + "\n")
    print(format_summary(prepared.summary), file=out)
    print(f"wrote {cache_path}", file=out)
    return cache


def _load_prepared(config: PipelineConfig, out: TextIO):
    """Encoded cache and schema for ``config``; runs prepare if stale or missing."""
    from .features import FeatureSchema

    cache_path, meta_path = _cache_paths(config.out)
    if cache_path.exists() and meta_path.exists():
        meta = json.loads(meta_path.read_text())
        if meta.get("prepare_config") == config.prepare_dict():
            cache = EncodedCache.load(cache_path)
            schema = FeatureSchema.from_dict(meta["schema"])
            if cache.schema_hash == schema.digest():
                return cache, schema
    print("prepared cache missing or stale; running prepare", file=out)
    cache = run_prepare(config, out)
    meta = json.loads(meta_path.read_text())
    return cache, FeatureSchema.from_dict(meta["schema"])


def _print_trace(name: str, trace: Sequence[float], out: TextIO, every: int = 10) -> None:
    points = [f"{i}:{v:.6g}" for i, v in enumerate(trace) if i % every == 0 or i == len(trace) - 1]
    print(f"  {name} loss trace  " + "  ".join(points), file=out)


def default_artifact_path(config: PipelineConfig) -> Path:
    if config.model == "ae":
        return config.out / f"model-ae-{'-'.join(map(str, config.code_sizes))}.json"
    return config.out / "model-mlp.json"


def run_train(config: PipelineConfig, artifact_path: str | None, out: TextIO) -> Path:
    cache, schema = _load_prepared(config, out)
    with stage("train"):
        artifact, tlog = train_model(config, cache.X_train, cache.y_train, schema)
    print(f"trained {artifact.classifier.tag} topology {'->'.join(map(str, artifact.classifier.network.dims))}",
          file=out)
    for i, r in enumerate(tlog.pretrain):
        _print_trace(f"pretrain tier {i + 1}", r.trace, out)
    for name, r in (("head", tlog.head), ("fine-tune", tlog.finetune), ("mlp", tlog.mlp)):
        if r is not None:
            _print_trace(name, r.trace, out)
    path = Path(artifact_path) if artifact_path else default_artifact_path(config)
    with stage("write artifact"):
        artifact.save(path)
    print(f"wrote {path}", file=out)
    return path


def run_eval(artifact_path: str, cache_path: Path, report_path: str | None, out: TextIO) -> EvalReport:
    with stage("load artifact"):
        artifact = ModelArtifact.load(artifact_path)
    with stage("load cache"):
        cache = EncodedCache.load(cache_path)
    if cache.schema_hash != artifact.schema.digest():
        err = DataError(f"schema mismatch: cache {cache_path} was encoded with schema "
                        f"{cache.schema_hash[:12]}, artifact expects {artifact.schema.digest()[:12]}")
        err.stage = "eval"  # type: ignore[attr-defined]
        raise err
    pred, _ = artifact.classifier.predict(cache.X_test)
    report = evaluate(cache.y_test, pred, artifact.classifier.tag, artifact.config_hash,
                      artifact.classifier.class_names)
    path = Path(report_path) if report_path else Path(artifact_path).with_suffix(".report.json")
    report.save(path)
    print(render_report([report]), file=out)
    print(f"\naccuracy {report.accuracy:.4f}; wrote {path}", file=out)
    return report


def run_score(artifact_path: str, source: TextIO, out: TextIO) -> int:
    """Write one line per input record; returns the number of rejected lines."""
    with stage("load artifact"):
        artifact = ModelArtifact.load(artifact_path)
    clf, schema = artifact.classifier, artifact.schema
    errors = 0
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            rec = parse_line(line, lineno, require_label=False)
        except DataError as exc:
            errors += 1
            print(f"error\t{exc}", file=out)
            continue
        label, proba = clf.predict(schema.encode(rec))
        print(clf.class_names[int(label)] + "\t" + "\t".join(f"{p:.6f}" for p in proba), file=out)
    return errors


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"nslids: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="ignore", under="ignore")

    try:
        if args.command in ("prepare", "train"):
            try:
                config = resolve_config(args)
            except (ValueError, OSError) as exc:
                raise UsageError(str(exc)) from exc
            if args.command == "prepare":
                run_prepare(config, out)
            else:
                run_train(config, args.artifact, out)
        elif args.command == "eval":
            out_dir = Path(args.out_dir) if args.out_dir else Path(args.artifact).parent
            cache = Path(args.cache) if args.cache else out_dir / CACHE_NAME
            run_eval(args.artifact, cache, args.report, out)
        elif args.command == "score":
            if args.input == "-":
                run_score(args.artifact, sys.stdin, out)
            else:
                with stage("read input"), open(args.input, encoding="utf-8") as fh:
                    run_score(args.artifact, fh, out)
        elif args.command == "report":
            with stage("load reports"):
                reports = [EvalReport.load(p) for p in args.reports]
            print(render_report(reports), file=out)
    except UsageError as exc:
        print(f"nslids: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"nslids: training error [{getattr(exc, 'stage', 'train')}]: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except NslIdsError as exc:
        print(f"nslids: data error [{getattr(exc, 'stage', args.command)}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"nslids: data error [{args.command}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
