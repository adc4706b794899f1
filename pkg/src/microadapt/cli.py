"""Command line entry points: validate, grade, recommend, simulate, report, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .assessment import AssessmentError, GradeReport, grade, load_quiz, submission_from_payload
from .graph import GraphError, Severity, parse_mindmap, validate
from .recommender import Depth, Origin, recommend
from .simulator import ScenarioError, load_scenario, run_cohort
from .stats import StatsError, cohort_compare
from .store import EventLog, StoreError, TimeWindow, demand_report, quality_report
from .timefmt import parse_timestamp


def _print_json(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def cmd_validate(args) -> int:
    try:
        text = Path(args.graph).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        graph = parse_mindmap(text)
    except GraphError as exc:
        print(f"{args.graph}: error: {exc}", file=sys.stderr)
        print("1 error, 0 warnings")
        return 1
    findings = validate(graph)
    errors = sum(1 for f in findings if f.severity is Severity.ERROR)
    warnings = len(findings) - errors
    for finding in findings:
        print(f"{args.graph}: {finding.severity.value}: {finding.message}")
    print(f"{errors} error{'s' if errors != 1 else ''},"
          f" {warnings} warning{'s' if warnings != 1 else ''}")
    return 1 if errors else 0


def cmd_grade(args) -> int:
    try:
        quiz = load_quiz(args.quiz)
        payload = json.loads(Path(args.submission).read_text(encoding="utf-8"))
        submission = submission_from_payload(payload)
        report = grade(quiz, submission)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssessmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _print_json(report.to_payload())
    return 0


def cmd_recommend(args) -> int:
    try:
        graph = parse_mindmap(Path(args.graph).read_text(encoding="utf-8"))
        payload = json.loads(Path(args.report).read_text(encoding="utf-8"))
        report = GradeReport.from_payload(
            payload, graded_at=parse_timestamp(payload.get("graded_at", "1970-01-01T00:00:00Z"))
        )
        rec = recommend(
            report, graph, Origin(args.origin), Depth(args.depth)
        )
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _print_json(rec.to_payload())
    return 0


def cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        metrics = run_cohort(scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    output = metrics.to_json()
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(output, end="")
    if args.csv:
        Path(args.csv).write_text(metrics.iterations_csv(), encoding="utf-8")
        print(f"wrote {args.csv}")
    return 0


def _open_log(path: str) -> EventLog:
    if not Path(path).exists():
        raise StoreError(f"log file {path} does not exist")
    return EventLog(path)


def cmd_report(args) -> int:
    try:
        if args.kind == "cohort":
            a = json.loads(Path(args.a).read_text(encoding="utf-8"))
            b = json.loads(Path(args.b).read_text(encoding="utf-8"))
            result = cohort_compare(a, b)
            _print_json(
                {
                    "mean_diff": result.mean_diff,
                    "effect_size": result.effect_size,
                    "p_value": result.p_value,
                    "u_statistic": result.u_statistic,
                    "method": result.method,
                }
            )
            return 0
        with _open_log(args.log) as log:
            records = log.records()
        if args.kind == "demand":
            window = TimeWindow(
                start=parse_timestamp(args.window_from) if args.window_from else None,
                end=parse_timestamp(args.window_to) if args.window_to else None,
            )
            rows = demand_report(records, window)
            _print_json({"rows": [{"unit_id": u, "count": c} for u, c in rows]})
        else:
            rows = quality_report(records)
            _print_json(
                {
                    "rows": [
                        {
                            **row.to_payload(),
                            "mean_rating": (
                                "n/a"
                                if row.mean_rating is None
                                else round(float(row.mean_rating), 4)
                            ),
                        }
                        for row in rows
                    ]
                }
            )
        return 0
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StoreError, StatsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ConfigError, create_app, load_config

    try:
        config = load_config(args.config)
        app = create_app(config)
    except (ConfigError, GraphError, AssessmentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="microadapt",
        description="Adaptive microlearning remediation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a mind map file")
    p.add_argument("graph")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("grade", help="grade a submission against a quiz")
    p.add_argument("quiz")
    p.add_argument("submission")
    p.set_defaults(func=cmd_grade)

    p = sub.add_parser("recommend", help="recommend units for a grade report")
    p.add_argument("report")
    p.add_argument("--graph", required=True)
    p.add_argument(
        "--origin",
        default="initial_fail",
        choices=[o.value for o in Origin],
    )
    p.add_argument(
        "--depth",
        default="direct",
        choices=[d.value for d in Depth],
    )
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("simulate", help="run a seeded cohort scenario")
    p.add_argument("scenario")
    p.add_argument("--out", help="write metrics JSON here instead of stdout")
    p.add_argument("--csv", help="also write per-iteration CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="analytics over an event log")
    rp = p.add_subparsers(dest="kind", required=True)
    d = rp.add_parser("demand", help="most-recommended units")
    d.add_argument("--log", required=True)
    d.add_argument("--from", dest="window_from")
    d.add_argument("--to", dest="window_to")
    d.set_defaults(func=cmd_report)
    q = rp.add_parser("quality", help="demand vs. rating rework flags")
    q.add_argument("--log", required=True)
    q.set_defaults(func=cmd_report)
    c = rp.add_parser("cohort", help="compare two score lists")
    c.add_argument("a")
    c.add_argument("b")
    c.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("config")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
