"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 config or data error, 3 backend
unavailable. All failures print a single machine-parsable line to
standard error: ``E:<code>:<message>``. The ``VESPA_LOG`` environment
variable (error|warn|info|debug) controls log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from .backends import parse_backends_file
from .docmodel import HashEmbedder, ingest
from .ensemble import (
    calibrate_weights,
    ensemble_search,
    load_weight_table,
    save_weight_table,
    table_to_dict,
)
from .errors import (
    BackendUnavailableError,
    ConfigError,
    DataError,
    PipelineError,
    VespaError,
)
from .evalkit import (
    class_report,
    field_report,
    load_eval_set,
    load_gold_labels,
    load_predictions_dir,
    save_report,
)
from .foi import parse_profile_file
from .pipeline import EditRecord, KnowledgeStore, extract_document, record_edit
from .processors import build_registry
from .questions import classify

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class _UsageError(Exception):
    """Raised by the parser instead of SystemExit so main controls the code."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="vespa", description="Field extraction over document QA ensembles.")
    sub = parser.add_subparsers(dest="command", metavar="<command>")

    p = sub.add_parser("extract", parents=[], help="extract profile fields from a document")
    p.add_argument("--doc", required=True, help="document file")
    p.add_argument("--format", required=True, choices=["plain", "structured"])
    p.add_argument("--profile", required=True, help="profile YAML")
    p.add_argument("--backends", required=True, help="backends YAML")
    p.add_argument("--weights", required=True, help="class-weight table (JSON or TSV)")
    p.add_argument("--embedder", default="none", choices=["none", "test-hash"])
    p.add_argument("--store", default="", help="knowledge store JSONL to append to")
    p.add_argument("--seed", type=int, default=None, help="override mock backend seeds")

    p = sub.add_parser("calibrate", help="learn class weights from an eval set")
    p.add_argument("--eval", required=True, dest="eval_path", help="eval set JSON")
    p.add_argument("--preds", required=True, help="directory of <model>.json prediction maps")
    p.add_argument("--out", required=True, help="weights JSON output path")

    p = sub.add_parser("ensemble-search", help="exhaustively score model subsets")
    p.add_argument("--eval", required=True, dest="eval_path")
    p.add_argument("--preds", required=True)
    p.add_argument("--weights", required=True, help="class-weight table (JSON or TSV)")
    p.add_argument("--out", required=True, help="result JSON output path")

    p = sub.add_parser("evaluate", help="score a store against gold labels")
    p.add_argument("--gold", required=True, help="gold labels JSONL")
    p.add_argument("--store", required=True, help="knowledge store JSONL")
    p.add_argument("--out", required=True, help="report TSV output path (JSON written alongside)")

    p = sub.add_parser("classify-question", help="print the class of a question")
    p.add_argument("text", help="question text")

    p = sub.add_parser("record-edit", help="append an expert correction")
    p.add_argument("--store", required=True)
    p.add_argument("--doc", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--value", required=True)
    p.add_argument("--editor", required=True)
    return parser


def _cmd_extract(args: argparse.Namespace) -> int:
    profile = parse_profile_file(args.profile)
    backends = parse_backends_file(args.backends, seed=args.seed)
    weights = load_weight_table(args.weights)
    with open(args.doc, "rb") as fh:
        data = fh.read()
    doc_id = os.path.splitext(os.path.basename(args.doc))[0]
    doc = ingest(data, args.format, doc_id=doc_id, source_path=args.doc)
    embedder = HashEmbedder() if args.embedder == "test-hash" else None
    registry = build_registry(profile.defaults)
    store = KnowledgeStore(args.store) if args.store else None
    eitl = store.eitl_provider() if store else None
    records = extract_document(
        doc,
        profile,
        backends,
        weights,
        embedder=embedder,
        registry=registry,
        eitl=eitl,
    )
    for record in records:
        if store is not None:
            store.append(record)
        shown = record.value if record.value is not None else "(abstain)"
        print(f"{record.field_name}\t{shown}\t{record.confidence:.4f}")
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    eval_set = load_eval_set(args.eval_path)
    predictions = load_predictions_dir(args.preds)
    table = calibrate_weights(eval_set, predictions)
    save_weight_table(table, args.out)
    sys.stdout.write(class_report(table))
    return 0


def _cmd_ensemble_search(args: argparse.Namespace) -> int:
    eval_set = load_eval_set(args.eval_path)
    predictions = load_predictions_dir(args.preds)
    table = load_weight_table(args.weights)
    result = ensemble_search(list(predictions.keys()), eval_set, predictions, table=table)
    payload = {
        "best_subset": list(result.best_subset),
        "best_score": result.best_score,
        "table": [{"models": list(s.models), "score": s.score} for s in result.table],
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print("best subset: " + ", ".join(result.best_subset))
    print(f"mean F1: {result.best_score:.4f}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    golds = load_gold_labels(args.gold)
    store = KnowledgeStore(args.store)
    report = field_report(golds, list(store.scan()))
    save_report(report, args.out)
    sys.stdout.write(report.to_tsv())
    return 0


def _cmd_classify(args: argparse.Namespace) -> int:
    print(classify(args.text).value)
    return 0


def _cmd_record_edit(args: argparse.Namespace) -> int:
    store = KnowledgeStore(args.store)
    old_value = store.latest_value(args.doc, args.field)
    edit = EditRecord(
        doc_id=args.doc,
        field_name=args.field,
        old_value=old_value,
        new_value=args.value,
        editor=args.editor,
        timestamp=time.time(),
    )
    record_edit(store, edit)
    print(f"recorded edit for ({args.doc}, {args.field})")
    return 0


_COMMANDS = {
    "extract": _cmd_extract,
    "calibrate": _cmd_calibrate,
    "ensemble-search": _cmd_ensemble_search,
    "evaluate": _cmd_evaluate,
    "classify-question": _cmd_classify,
    "record-edit": _cmd_record_edit,
}


def run(argv: list[str] | None = None) -> int:
    level = _LOG_LEVELS.get(os.environ.get("VESPA_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            sys.stderr.write("E:1:no subcommand given\n")
            return 1
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"E:1:{exc}\n")
        return 1
    except (ConfigError, DataError) as exc:
        sys.stderr.write(f"E:2:{exc}\n")
        return 2
    except (BackendUnavailableError, PipelineError) as exc:
        sys.stderr.write(f"E:3:{exc}\n")
        return 3
    except VespaError as exc:
        sys.stderr.write(f"E:2:{exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"E:2:{exc}\n")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
