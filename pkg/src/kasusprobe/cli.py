"""Command-line pipeline: generate, train, score, import external scores
and annotations, evaluate, report, correlate, serve.

Every stage writes its outputs atomically and drops a manifest next to
each output (`<output>.manifest.json`) recording the tool version, the
command, its configuration, and sha256 hashes of inputs and outputs.
Manifests have no timestamps, so reruns with identical inputs are
byte-identical. The dataset file's hash acts as a join key: evaluate
stamps it into the per-set manifest and report refuses per-set files
whose recorded hash does not match the dataset it is given.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, genset, metrics, scoring
from .lexicon import LexiconError, load_lexicon
from .metrics import MetricsError
from .scoring import ScoringError
from .service import AnnotationStore, AssignmentConfig, derive_filler_pool, make_server

ENV_PREFIX = "KASUSPROBE_"


class CliError(Exception):
    pass


def _env_path(name: str) -> Optional[str]:
    return os.environ.get(ENV_PREFIX + name) or None


def _packaged(name: str) -> Path:
    return Path(str(resources.files("kasusprobe").joinpath("data", name)))


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    partial file and interrupted runs leave no truncated output."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_manifest(
    output: Path,
    command: str,
    config: dict,
    inputs: dict[str, Path],
    extra: Optional[dict] = None,
) -> Path:
    manifest = {
        "tool": "kasusprobe",
        "tool_version": __version__,
        "command": command,
        "config": config,
        "inputs": {name: sha256_file(p) for name, p in sorted(inputs.items())},
        "output_sha256": sha256_file(output),
    }
    if extra:
        manifest.update(extra)
    manifest_path = output.with_name(output.name + ".manifest.json")
    atomic_write_text(
        manifest_path, json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
    )
    return manifest_path


def read_manifest(output: Path) -> Optional[dict]:
    manifest_path = output.with_name(output.name + ".manifest.json")
    if not manifest_path.exists():
        return None
    return json.loads(manifest_path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Per-set AUC file format: one JSON object per line

def write_per_set(path: Path, set_aucs: Sequence[metrics.SetAuc]) -> None:
    lines = []
    for s in sorted(set_aucs, key=lambda s: (s.acceptable_id, s.restriction)):
        lines.append(
            json.dumps(
                {
                    "acceptable_id": s.acceptable_id,
                    "restriction": s.restriction,
                    "auc": s.auc,
                    "case_order": s.case_order,
                    "role_label": s.role_label,
                    "template_id": s.template_id,
                },
                ensure_ascii=False,
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_per_set(path: Path) -> list[metrics.SetAuc]:
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
            records.append(
                metrics.SetAuc(
                    acceptable_id=raw["acceptable_id"],
                    restriction=raw["restriction"],
                    auc=float(raw["auc"]),
                    case_order=raw["case_order"],
                    role_label=raw["role_label"],
                    template_id=raw["template_id"],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CliError(f"{path}: line {lineno}: bad per-set record ({exc})") from None
    if not records:
        raise CliError(f"{path}: no per-set AUC records")
    return records


# ---------------------------------------------------------------------------
# Subcommands

def cmd_generate(args) -> int:
    lexicon_path = Path(args.lexicon or _env_path("LEXICON") or _packaged("sample_lexicon.jsonl"))
    templates_path = Path(
        args.templates or _env_path("TEMPLATES") or _packaged("sample_templates.jsonl")
    )
    lexicon = load_lexicon(lexicon_path)
    templates = genset.load_templates(templates_path)
    dataset = genset.build_dataset(templates, lexicon)

    out_dataset = Path(args.out_dataset)
    out_sets = Path(args.out_sets)
    atomic_write_text(out_dataset, "".join(genset.dataset_to_lines(dataset)))
    atomic_write_text(out_sets, "".join(genset.sets_to_lines(dataset)))

    config = {
        "lexicon": str(lexicon_path),
        "templates": str(templates_path),
    }
    inputs = {"lexicon": lexicon_path, "templates": templates_path}
    dataset_hash = sha256_file(out_dataset)
    write_manifest(out_dataset, "generate", config, inputs, {"dataset_sha256": dataset_hash})
    write_manifest(out_sets, "generate", config, inputs, {"dataset_sha256": dataset_hash})

    total = len(dataset.records)
    acceptable = sum(1 for r in dataset.records if r.acceptable)
    print(f"templates: {len(dataset.template_ids)}")
    print(f"{total} total / {acceptable} acceptable / {total - acceptable} unacceptable")
    print(f"dataset: {out_dataset}")
    print(f"sets: {out_sets}")
    return 0


def cmd_train(args) -> int:
    corpus_path = Path(args.corpus or _env_path("CORPUS") or "")
    if not str(corpus_path):
        raise CliError("--corpus is required (or set KASUSPROBE_CORPUS)")

    def corpus():
        with open(corpus_path, encoding="utf-8") as fh:
            for line in fh:
                tokens = scoring.tokenize(line.strip())
                if tokens:
                    yield tokens

    model = scoring.train_ngram(corpus, order=args.order, vocab_size=args.vocab_size)
    out = Path(args.out_model)
    atomic_write_text(out, scoring.model_to_json(model))
    write_manifest(
        out,
        "train",
        {"corpus": str(corpus_path), "order": args.order, "vocab_size": args.vocab_size},
        {"corpus": corpus_path},
    )
    print(f"order={model.order} vocab={len(model.vocab)} tokens={model.total_tokens}")
    print(f"model: {out}")
    return 0


def cmd_score(args) -> int:
    dataset = genset.read_dataset(Path(args.dataset))
    model = scoring.model_from_json(Path(args.model).read_text(encoding="utf-8"))
    table = scoring.score_records(
        model, dataset.records, include_punctuation=not args.strip_punctuation
    )
    out = Path(args.out_scores)
    atomic_write_text(out, scoring.scores_to_text(table))
    write_manifest(
        out,
        "score",
        {
            "dataset": args.dataset,
            "model": args.model,
            "strip_punctuation": args.strip_punctuation,
        },
        {"dataset": Path(args.dataset), "model": Path(args.model)},
        {"dataset_sha256": sha256_file(Path(args.dataset))},
    )
    print(f"scored {len(table.entries)} sentences")
    print(f"scores: {out}")
    return 0


def cmd_export_requests(args) -> int:
    dataset = genset.read_dataset(Path(args.dataset))
    out = Path(args.out_requests)
    atomic_write_text(out, scoring.requests_to_text(dataset.records))
    write_manifest(
        out,
        "export-requests",
        {"dataset": args.dataset},
        {"dataset": Path(args.dataset)},
        {"dataset_sha256": sha256_file(Path(args.dataset))},
    )
    print(f"exported {len(dataset.records)} scoring requests")
    print(f"requests: {out}")
    return 0


def cmd_import_scores(args) -> int:
    dataset = genset.read_dataset(Path(args.dataset))
    table = scoring.import_scores(Path(args.scores_in), known_ids=set(dataset.by_id))
    missing = scoring.missing_ids(table, (r.id for r in dataset.records))
    if missing and not args.allow_partial:
        raise CliError(
            f"score file covers {len(table.entries)} of {len(dataset.records)} sentences; "
            f"{len(missing)} missing (first: {missing[0]}); pass --allow-partial to accept"
        )
    out = Path(args.out_scores)
    atomic_write_text(out, scoring.scores_to_text(table))
    write_manifest(
        out,
        "import-scores",
        {"dataset": args.dataset, "scores_in": args.scores_in, "allow_partial": args.allow_partial},
        {"dataset": Path(args.dataset), "scores_in": Path(args.scores_in)},
        {"dataset_sha256": sha256_file(Path(args.dataset))},
    )
    print(f"imported {len(table.entries)} scores" + (f" ({len(missing)} missing)" if missing else ""))
    print(f"scores: {out}")
    return 0


def cmd_import_annotations(args) -> int:
    records = metrics.read_annotations(Path(args.annotations))
    annotators = {r.annotator_id for r in records}
    if args.qc:
        retained = metrics.qc_filter(records)
        removed = annotators - retained
        records = [r for r in records if r.annotator_id in retained]
        print(f"QC: retained {len(retained)} of {len(annotators)} annotators")
        if removed:
            print("removed: " + ", ".join(sorted(removed)))
        if not records:
            raise CliError("no annotations left after QC")
    scores = metrics.normalize_annotations(records, include_fillers=args.include_fillers)
    if not scores:
        raise CliError("no test-sentence annotations to normalize")
    out = Path(args.out_scores)
    lines = [f"{sid}\t{score!r}\n" for sid, score in sorted(scores.items())]
    atomic_write_text(out, "".join(lines))
    write_manifest(
        out,
        "import-annotations",
        {
            "annotations": args.annotations,
            "qc": args.qc,
            "include_fillers": args.include_fillers,
        },
        {"annotations": Path(args.annotations)},
    )
    print(f"normalized scores for {len(scores)} sentences")
    print(f"scores: {out}")
    return 0


def cmd_evaluate(args) -> int:
    dataset = genset.read_dataset(Path(args.dataset))
    table = scoring.import_scores(Path(args.scores), known_ids=set(dataset.by_id))
    set_aucs = metrics.evaluate_sets(
        dataset, table, restriction=args.restriction, skip_incomplete=args.skip_incomplete
    )
    out = Path(args.out)
    write_per_set(out, set_aucs)
    write_manifest(
        out,
        "evaluate",
        {"dataset": args.dataset, "scores": args.scores, "restriction": args.restriction},
        {"dataset": Path(args.dataset), "scores": Path(args.scores)},
        {"dataset_sha256": sha256_file(Path(args.dataset))},
    )
    mean = sum(s.auc for s in set_aucs) / len(set_aucs)
    print(f"{len(set_aucs)} sets, mean AUC {mean:.4f} ({args.restriction})")
    print(f"per-set: {out}")
    return 0


def _check_dataset_hash(per_set_path: Path, dataset_path: Optional[str]) -> None:
    if not dataset_path:
        return
    manifest = read_manifest(per_set_path)
    if manifest is None or "dataset_sha256" not in manifest:
        return
    actual = sha256_file(Path(dataset_path))
    if manifest["dataset_sha256"] != actual:
        raise CliError(
            f"{per_set_path} was evaluated against a different dataset "
            f"(manifest hash {manifest['dataset_sha256'][:12]}..., "
            f"given dataset hashes to {actual[:12]}...)"
        )


def cmd_report(args) -> int:
    per_set_path = Path(args.per_set)
    _check_dataset_hash(per_set_path, args.dataset)
    set_aucs = read_per_set(per_set_path)
    ranking = metrics.RANKING_PRESETS[args.ranking]
    table = metrics.aggregate(set_aucs, ranking=ranking, group_by=args.group_by)

    if args.format == "markdown":
        rendered = metrics.render_markdown(table, title=args.title, digits=args.digits)
    elif args.format == "csv":
        rendered = metrics.render_csv(table)
    else:
        payload = {
            "rows": list(table.rows),
            "cols": list(table.cols),
            "cells": {f"{r}|{c}": v for (r, c), v in sorted(table.cells.items())},
            "row_means": table.row_means,
            "col_means": table.col_means,
            "grand_mean": table.grand_mean,
        }
        rendered = json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"

    if args.out:
        out = Path(args.out)
        atomic_write_text(out, rendered)
        inputs = {"per_set": per_set_path}
        if args.dataset:
            inputs["dataset"] = Path(args.dataset)
        write_manifest(
            out,
            "report",
            {
                "per_set": args.per_set,
                "group_by": args.group_by,
                "ranking": args.ranking,
                "format": args.format,
            },
            inputs,
        )
        print(f"report: {out}")
    else:
        sys.stdout.write(rendered)

    if args.constraints:
        if args.group_by != "case_order*role":
            raise CliError("--constraints requires --group-by case_order*role")
        report = metrics.constraint_check(table)
        sys.stdout.write(
            json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"
        )
    return 0


def cmd_correlate(args) -> int:
    left = read_per_set(Path(args.left))
    right = read_per_set(Path(args.right))
    if args.dataset:
        _check_dataset_hash(Path(args.left), args.dataset)
        _check_dataset_hash(Path(args.right), args.dataset)

    if args.mode == "sets":
        lmap = {(s.acceptable_id, s.restriction): s.auc for s in left}
        rmap = {(s.acceptable_id, s.restriction): s.auc for s in right}
    else:
        lmap = {}
        rmap = {}
        for records, target in ((left, lmap), (right, rmap)):
            buckets: dict[tuple, list[float]] = {}
            for s in records:
                buckets.setdefault((s.case_order, s.role_label, s.restriction), []).append(s.auc)
            target.update({k: sum(v) / len(v) for k, v in buckets.items()})

    shared = sorted(set(lmap) & set(rmap))
    if len(shared) < 2:
        raise CliError(
            f"need at least 2 shared {args.mode} to correlate, found {len(shared)}"
        )
    dropped = (len(lmap) - len(shared), len(rmap) - len(shared))
    r = metrics.pearson([lmap[k] for k in shared], [rmap[k] for k in shared])
    payload = {
        "mode": args.mode,
        "n": len(shared),
        "pearson": r,
        "dropped_left": dropped[0],
        "dropped_right": dropped[1],
    }
    rendered = json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        atomic_write_text(out, rendered)
        write_manifest(
            out,
            "correlate",
            {"left": args.left, "right": args.right, "mode": args.mode},
            {"left": Path(args.left), "right": Path(args.right)},
        )
        print(f"pearson={r:.4f} n={len(shared)}")
        print(f"correlation: {out}")
    else:
        sys.stdout.write(rendered)
    return 0


def cmd_serve(args) -> int:
    dataset = genset.read_dataset(Path(args.dataset))
    config = AssignmentConfig(
        test_items=args.test_items,
        max_per_template=args.max_per_template,
        acceptable_fraction=args.acceptable_fraction,
        target_annotations=args.target_annotations,
        filler_interval=args.filler_interval,
        warmup_items=args.warmup_items,
    )
    filler_pool = derive_filler_pool(dataset, per_kind=args.fillers_per_kind, seed=args.filler_seed)
    store = AnnotationStore(Path(args.store))
    server = make_server(
        store,
        dataset,
        filler_pool,
        config=config,
        host=args.host,
        port=args.port,
        static_dir=args.static_dir,
        verbose=args.verbose,
    )
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (store: {args.store})")
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        store.close()
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kasusprobe",
        description="Generate, score and evaluate German case-assignment acceptability probes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build the sentence dataset and its variation-set index")
    p.add_argument("--templates", help="template JSONL (default: packaged samples)")
    p.add_argument("--lexicon", help="lexicon JSONL (default: packaged samples)")
    p.add_argument("--out-dataset", required=True)
    p.add_argument("--out-sets", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a unigram or Laplace-bigram model from a text corpus")
    p.add_argument("--corpus", help="one sentence per line (default: $KASUSPROBE_CORPUS)")
    p.add_argument("--order", type=int, choices=(1, 2), default=2)
    p.add_argument("--vocab-size", type=int, default=scoring.DEFAULT_VOCAB_SIZE)
    p.add_argument("--out-model", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a dataset with a trained n-gram model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-scores", required=True)
    p.add_argument(
        "--strip-punctuation",
        action="store_true",
        help="drop detached punctuation tokens before scoring",
    )
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("export-requests", help="write the request file for an external scorer")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-requests", required=True)
    p.set_defaults(func=cmd_export_requests)

    p = sub.add_parser("import-scores", help="validate and import an external score file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scores-in", required=True)
    p.add_argument("--out-scores", required=True)
    p.add_argument("--allow-partial", action="store_true")
    p.set_defaults(func=cmd_import_scores)

    p = sub.add_parser(
        "import-annotations",
        help="QC-filter and normalize human ratings into a per-sentence score file",
    )
    p.add_argument("--annotations", required=True, help="annotation records, one JSON per line")
    p.add_argument("--out-scores", required=True)
    p.add_argument("--no-qc", dest="qc", action="store_false", help="skip the filler QC filter")
    p.add_argument(
        "--include-fillers",
        action="store_true",
        help="let filler ratings participate in normalization and output",
    )
    p.set_defaults(func=cmd_import_annotations)

    p = sub.add_parser("evaluate", help="compute one AUC per minimal variation set")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--restriction", choices=metrics.RESTRICTIONS, default="all")
    p.add_argument(
        "--skip-incomplete",
        action="store_true",
        help="drop sets with missing scores instead of failing",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate per-set AUCs into tables")
    p.add_argument("--per-set", required=True, help="per-set AUC file from evaluate")
    p.add_argument("--dataset", help="cross-check the per-set manifest against this dataset")
    p.add_argument("--group-by", choices=metrics.GROUP_BY_MODES, default="case_order*role")
    p.add_argument("--ranking", choices=sorted(metrics.RANKING_PRESETS), default="appendix")
    p.add_argument("--format", choices=("markdown", "csv", "json"), default="markdown")
    p.add_argument("--digits", type=int, default=2)
    p.add_argument("--title")
    p.add_argument("--out")
    p.add_argument(
        "--constraints",
        action="store_true",
        help="also print the nominative/dative ordering-constraint check",
    )
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("correlate", help="Pearson correlation between two per-set AUC files")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--mode", choices=("sets", "cells"), default="sets")
    p.add_argument("--dataset", help="cross-check both manifests against this dataset")
    p.add_argument("--out")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--dataset", required=True)
    p.add_argument("--store", required=True, help="append-only rating log (created if missing)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--static-dir", help="serve this directory at / (the browser frontend)")
    p.add_argument("--test-items", type=int, default=216)
    p.add_argument("--max-per-template", type=int, default=5)
    p.add_argument("--acceptable-fraction", type=float, default=0.25)
    p.add_argument("--target-annotations", type=int, default=3)
    p.add_argument("--filler-interval", type=int, default=12)
    p.add_argument("--warmup-items", type=int, default=6)
    p.add_argument("--fillers-per-kind", type=int, default=60)
    p.add_argument("--filler-seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, LexiconError, MetricsError, ScoringError, genset.GensetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc.filename or exc}: file not found", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
