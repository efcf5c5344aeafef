"""Researcher command line: validate, serve, simulate, score, export.

Exit codes: 0 success, 1 validation or scoring failure, 2 usage error
(argparse), 3 I/O failure.  `--json` switches stdout to machine-readable
JSON on the subcommands that produce data.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from typing import Dict, List, Optional, Sequence

from .bots import BotSpec, parse_bot_spec, run_bot_session
from .congruence import EmptyTruth
from .dsl import CONDITIONS, ParseResult, build_menu, parse_study
from .generation import CoverageUnsatisfiable
from .service import Store, NotFound, export_csv, serve
from .session import (
    SessionError,
    SessionReport,
    parse_log,
    replay,
    report_to_dict,
    serialize_log,
    session_report,
)
from .rng import PURPOSE_SIMULATION, split_seed

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _read_file(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _print_issues(path: str, result: ParseResult, out) -> None:
    for issue in result.issues:
        print(f"{path}:{issue.line}:{issue.column}: {issue.severity}: {issue.message}", file=out)


def _load_study_or_fail(path: str, json_mode: bool) -> "tuple[int, Optional[object]]":
    try:
        source = _read_file(path)
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_IO, None
    result = parse_study(source)
    if result.study is None:
        if json_mode:
            print(json.dumps(_issues_doc(result), sort_keys=True))
        else:
            _print_issues(path, result, sys.stderr)
        return EXIT_VALIDATION, None
    return EXIT_OK, result.study


def _issues_doc(result: ParseResult) -> Dict:
    return {
        "ok": result.ok,
        "issues": [
            {
                "line": i.line,
                "column": i.column,
                "severity": i.severity,
                "code": i.code,
                "message": i.message,
            }
            for i in result.issues
        ],
    }


# -- validate


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        source = _read_file(args.file)
    except OSError as exc:
        print(f"cannot read {args.file}: {exc}", file=sys.stderr)
        return EXIT_IO
    result = parse_study(source)
    if result.study is None:
        if args.json:
            print(json.dumps(_issues_doc(result), sort_keys=True))
        else:
            _print_issues(args.file, result, sys.stderr)
        return EXIT_VALIDATION
    study = result.study
    menu = build_menu(study)
    summary = {
        "name": study.name,
        "classes": len(study.classes),
        "features": len(study.features),
        "rules": len(study.truth),
        "menu_atoms": len(menu.atoms),
        "observations": study.observation_params.count,
        "predictions_per_round": study.prediction_params.count,
        "menu_warnings": list(menu.warnings),
    }
    if args.json:
        print(json.dumps(dict(_issues_doc(result), summary=summary), sort_keys=True))
    else:
        print(
            f"study {study.name!r}: {summary['classes']} classes, "
            f"{summary['features']} features, {summary['rules']} rules, "
            f"{summary['menu_atoms']} menu atoms, {summary['observations']} observations"
        )
        for warning in menu.warnings:
            print(f"warning: {warning}")
    return EXIT_OK


# -- serve


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        serve(args.data, listen=args.listen, assets_dir=args.assets)
    except OSError as exc:
        print(f"cannot serve: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


# -- simulate


def _report_row(report: SessionReport) -> Dict:
    post = report.post
    return {
        "session_id": report.session_id,
        "seed": report.seed,
        "condition": report.condition,
        "pre_recall": report.pre.element_recall,
        "pre_precision": report.pre.element_precision,
        "pre_relation_acc": report.pre.relation_accuracy,
        "pre_composite": report.pre.composite,
        "post_recall": post.element_recall if post else None,
        "post_precision": post.element_precision if post else None,
        "post_relation_acc": post.relation_accuracy if post else None,
        "post_composite": post.composite if post else None,
        "delta_composite": report.delta.composite if report.delta else None,
        "pred_acc_pre": report.accuracy_round1,
        "pred_acc_post": report.accuracy_round2,
        "completed": report.completed,
    }


_AGGREGATE_METRICS = (
    "pre_recall",
    "pre_precision",
    "pre_relation_acc",
    "pre_composite",
    "post_composite",
    "delta_composite",
    "pred_acc_pre",
    "pred_acc_post",
)


def _median_iqr(values: List[float]) -> Dict[str, float]:
    median = statistics.median(values)
    if len(values) < 2:
        return {"median": median, "iqr": 0.0}
    quartiles = statistics.quantiles(values, n=4, method="inclusive")
    return {"median": median, "iqr": quartiles[2] - quartiles[0]}


def cmd_simulate(args: argparse.Namespace) -> int:
    code, study = _load_study_or_fail(args.study, args.json)
    if study is None:
        return code
    try:
        base_spec = parse_bot_spec(args.bot)
    except ValueError as exc:
        print(f"bad bot spec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        print(f"cannot create {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO

    rows: List[Dict] = []
    try:
        for index in range(args.n):
            session_id = f"sim-{index + 1:04d}"
            bot_seed = split_seed(args.seed, PURPOSE_SIMULATION, salt=index)
            spec = BotSpec(
                kind=base_spec.kind,
                p=base_spec.p,
                min_support=base_spec.min_support,
                lift_threshold=base_spec.lift_threshold,
                seed=bot_seed,
            )
            state = run_bot_session(study, spec, args.condition, session_id=session_id, ts=0)
            report = session_report(state, study.truth, study.features)
            rows.append(_report_row(report))
            log_path = os.path.join(args.out, session_id + ".log")
            with open(log_path, "w", encoding="utf-8") as fh:
                fh.write(serialize_log(state.events))
    except (CoverageUnsatisfiable, EmptyTruth, SessionError) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"cannot write logs: {exc}", file=sys.stderr)
        return EXIT_IO

    aggregate = {}
    for metric in _AGGREGATE_METRICS:
        values = [row[metric] for row in rows if row[metric] is not None]
        if values:
            aggregate[metric] = _median_iqr(values)
    summary = {
        "format": 1,
        "study": study.name,
        "bot": base_spec.describe(),
        "condition": args.condition,
        "n": args.n,
        "seed": args.seed,
        "sessions": rows,
        "aggregate": aggregate,
    }
    text = json.dumps(summary, sort_keys=True, indent=2) + "\n"
    summary_path = os.path.join(args.out, "summary.json")
    try:
        with open(summary_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"cannot write {summary_path}: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.json:
        print(text, end="")
    else:
        med = aggregate.get("pre_composite", {}).get("median")
        print(f"ran {args.n} session(s); median pre composite {med}; summary at {summary_path}")
    return EXIT_OK


# -- score


def cmd_score(args: argparse.Namespace) -> int:
    code, study = _load_study_or_fail(args.study, args.json)
    if study is None:
        return code
    try:
        log_text = _read_file(args.log)
    except OSError as exc:
        print(f"cannot read {args.log}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        events = parse_log(log_text)
        state = replay(events, study)
        report = session_report(state, study.truth, study.features)
    except (SessionError, EmptyTruth, CoverageUnsatisfiable) as exc:
        seq = getattr(exc, "seq", None)
        where = f" (event seq {seq})" if seq is not None else ""
        print(f"cannot score log: {exc}{where}", file=sys.stderr)
        return EXIT_VALIDATION
    print(json.dumps(report_to_dict(report), sort_keys=True, indent=2))
    return EXIT_OK


# -- export


def cmd_export(args: argparse.Namespace) -> int:
    try:
        store = Store(args.data)
        text = export_csv(store, args.study_id)
    except NotFound as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, RuntimeError) as exc:
        print(f"cannot open store: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mma",
        description="Run and analyze rule-elicitation studies against a transparent classifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse a study file and report issues")
    p.add_argument("file", help="study file to check")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--data", required=True, help="data directory (studies + session logs)")
    p.add_argument("--listen", default="127.0.0.1:8000", help="host:port to bind")
    p.add_argument("--assets", default=None, help="static asset directory for the web UI")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="run simulated participant sessions")
    p.add_argument("--study", required=True, help="study file")
    p.add_argument(
        "--bot",
        default="perfect",
        help="bot spec: perfect | random | forgetful:p=0.5 | frequency:min_support=3,lift=0.3",
    )
    p.add_argument("--condition", default="none", choices=list(CONDITIONS))
    p.add_argument("--n", type=int, default=1, help="number of sessions")
    p.add_argument("--seed", type=int, default=0, help="master seed for per-session bot seeds")
    p.add_argument("--out", required=True, help="output directory for logs and summary.json")
    p.add_argument("--json", action="store_true", help="print the summary JSON to stdout")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score", help="replay one event log and print its report")
    p.add_argument("--log", required=True, help="session event log")
    p.add_argument("--study", required=True, help="study file the log belongs to")
    p.add_argument("--json", action="store_true", help=argparse.SUPPRESS)  # always JSON
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("export", help="write the per-session CSV for a study")
    p.add_argument("--data", required=True, help="data directory of a served instance")
    p.add_argument("--study-id", required=True, help="study id in the store")
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
