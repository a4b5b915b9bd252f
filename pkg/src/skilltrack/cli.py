"""Administration CLI.

Each subcommand fronts one library operation against a file-backed data
directory. Success exits 0; failures exit non-zero after printing a single
machine-parsable line ``error: <kind>: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import yaml

from . import analytics, capture, mapping, scheduling, service, synth
from .domain import SkillTrackError, UnknownReference
from .eventlog import PersistentState
from .registry import load_slots, serialize


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SkillTrackError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io-error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skilltrack",
        description="Workplace-based assessment platform administration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("load-registry", help="import an entity-definition document")
    p.add_argument("file", type=Path)
    p.add_argument("--data-dir", type=Path, required=True)
    p.set_defaults(func=_cmd_load_registry)

    p = sub.add_parser("import-batch", help="apply capture batches (JSON or JSONL)")
    p.add_argument("file", type=Path)
    p.add_argument("--data-dir", type=Path, required=True)
    p.set_defaults(func=_cmd_import_batch)

    p = sub.add_parser("export-report", help="write a report table")
    p.add_argument(
        "report", choices=["coverage", "consistency", "calibration", "portfolio"]
    )
    p.add_argument("--data-dir", type=Path, required=True)
    p.add_argument("--student", help="student id (consistency/portfolio)")
    p.add_argument("--scope", default="all", help="all|procedure|item|outcome")
    p.add_argument("--scope-id")
    p.add_argument("--threshold", type=int, default=analytics.DEFAULT_THRESHOLD)
    p.add_argument("--last-n", type=int)
    p.add_argument("--min-experience", type=int, default=5)
    p.add_argument("--sufficiency-threshold", type=float, default=0.8)
    p.add_argument("--out", type=Path, help="output file (default stdout)")
    p.set_defaults(func=_cmd_export_report)

    p = sub.add_parser("generate-cohort", help="emit a synthetic registry and log")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--students", type=int)
    p.add_argument("--staff", type=int)
    p.add_argument("--locations", type=int)
    p.add_argument("--outcomes", type=int)
    p.add_argument("--procedures", type=int)
    p.add_argument("--questions", type=int)
    p.add_argument("--years", type=float)
    p.add_argument("--session-rate", type=float, help="sessions per student-week")
    p.add_argument("--mean-obs", type=float, help="mean observations per session")
    p.add_argument("--noise", type=float)
    p.add_argument("--strictness-spread", type=float)
    p.add_argument("--locations-per-program", type=int)
    p.add_argument("--procedures-per-location", type=int)
    p.set_defaults(func=_cmd_generate_cohort)

    p = sub.add_parser("plan-allocations", help="allocate students to patient slots")
    p.add_argument("--data-dir", type=Path, required=True)
    p.add_argument("--slots", type=Path, help="document with a slots section")
    p.add_argument("--hold-consistency", type=float, default=0.9)
    p.add_argument("--hold-min-experience", type=int, default=5)
    p.add_argument("--min-experience", type=int, default=5)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=_cmd_plan_allocations)

    p = sub.add_parser("generate-exam", help="greedy blueprint-satisfying exam")
    p.add_argument("--data-dir", type=Path, required=True)
    p.add_argument("--constraints", type=Path, required=True,
                   help="YAML list of {outcome_id, min_questions, max_questions}")
    p.add_argument("--size-limit", type=int, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=_cmd_generate_exam)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--data-dir", type=Path, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8420)
    p.set_defaults(func=_cmd_serve)

    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _cmd_load_registry(args) -> int:
    persistent = PersistentState(args.data_dir)
    registry = persistent.load_registry(args.file.read_text(encoding="utf-8"))
    print(
        f"loaded registry: {len(registry.outcomes)} outcomes, "
        f"{len(registry.procedures)} procedures, {len(registry.items)} items, "
        f"{len(registry.staff)} staff, {len(registry.students)} students, "
        f"{len(registry.locations)} locations, {len(registry.questions)} questions"
    )
    return 0


def _cmd_import_batch(args) -> int:
    persistent = PersistentState(args.data_dir)
    applied = skipped = 0
    for line in args.file.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        batch = capture.batch_from_json(line)
        result = persistent.import_batch(batch)
        if result.applied:
            applied += 1
        else:
            skipped += 1
    print(f"imported {applied} batch(es), {skipped} already applied")
    return 0


def _cmd_export_report(args) -> int:
    persistent = PersistentState(args.data_dir)
    state = persistent.state
    log = state.observation_log()
    if args.report == "coverage":
        report = mapping.coverage_report(state.registry, state.edges(), log)
        _emit(report.to_table(), args.out)
        return 0
    if args.report == "calibration":
        _emit(analytics.calibration_table(analytics.calibration_report(log)), args.out)
        return 0
    if args.report == "consistency":
        students = [args.student] if args.student else sorted(state.registry.students)
        window = (
            analytics.Window(last_n=args.last_n) if args.last_n is not None else None
        )
        pairs = []
        for student_id in students:
            query = analytics.ConsistencyQuery(
                student_id=student_id,
                scope=analytics.Scope(
                    kind=analytics.ScopeKind(args.scope), id=args.scope_id
                ),
                threshold=args.threshold,
                window=window,
            )
            pairs.append(
                (query, analytics.sessional_consistency(log, query, state.edges()))
            )
        _emit(analytics.consistency_table(pairs), args.out)
        return 0
    if args.report == "portfolio":
        if not args.student:
            raise analytics.InvalidQuery("portfolio export needs --student")
        config = analytics.PortfolioConfig(
            min_experience=args.min_experience,
            sufficiency_threshold=args.sufficiency_threshold,
            indicator_threshold=args.threshold,
        )
        entries = analytics.portfolio(log, state.registry, args.student, config)
        _emit(analytics.portfolio_table(args.student, entries), args.out)
        return 0
    raise AssertionError(args.report)  # pragma: no cover


def _cmd_generate_cohort(args) -> int:
    overrides = {
        "seed": args.seed,
        "n_students": args.students,
        "n_staff": args.staff,
        "n_locations": args.locations,
        "n_outcomes": args.outcomes,
        "n_procedures": args.procedures,
        "n_questions": args.questions,
        "years": args.years,
        "sessions_per_student_week": args.session_rate,
        "mean_observations_per_session": args.mean_obs,
        "noise_level": args.noise,
        "staff_strictness_spread": args.strictness_spread,
        "locations_per_program": args.locations_per_program,
        "procedures_per_location": args.procedures_per_location,
    }
    config = synth.CohortConfig(
        **{k: v for k, v in overrides.items() if v is not None}
    )
    registry, log = synth.generate(config)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "registry.yaml").write_text(serialize(registry), encoding="utf-8")
    with (args.out_dir / "observations.jsonl").open("w", encoding="utf-8") as fh:
        for batch in capture.batches_from_log(log):
            fh.write(capture.batch_to_json(batch) + "\n")
    (args.out_dir / "config.json").write_text(
        json.dumps(
            {
                k: (v.isoformat() if hasattr(v, "isoformat") else v)
                for k, v in dataclasses.asdict(config).items()
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    print(
        f"generated cohort: {len(registry.students)} students, "
        f"{log.n_sessions} sessions, {len(log)} observations -> {args.out_dir}"
    )
    return 0


def _cmd_plan_allocations(args) -> int:
    persistent = PersistentState(args.data_dir)
    state = persistent.state
    slot_specs = state.registry.slots
    if args.slots is not None:
        slot_specs = load_slots(args.slots)
    for spec in slot_specs:
        if spec.procedure_id not in state.registry.procedures:
            raise UnknownReference(
                f"slot {spec.slot_id} references unknown procedure "
                f"{spec.procedure_id}"
            )
    slots = [scheduling.PatientSlot.from_spec(s) for s in slot_specs]
    config = scheduling.PlanConfig(
        hold_consistency=args.hold_consistency,
        hold_min_experience=args.hold_min_experience,
        min_experience=args.min_experience,
    )
    students = sorted(state.registry.students)
    result = persistent.create_plan(students, slots, config)
    _emit(result.to_table(), args.out)
    return 0


def _cmd_generate_exam(args) -> int:
    persistent = PersistentState(args.data_dir)
    doc = yaml.safe_load(args.constraints.read_text(encoding="utf-8")) or []
    constraints = [
        mapping.BlueprintConstraint(
            outcome_id=c["outcome_id"],
            min_questions=int(c.get("min_questions", 0)),
            max_questions=(
                int(c["max_questions"]) if c.get("max_questions") is not None else None
            ),
        )
        for c in doc
    ]
    exam = mapping.generate_exam(
        persistent.state.registry.questions.values(),
        constraints,
        size_limit=args.size_limit,
    )
    _emit("\n".join(exam) + "\n", args.out)
    return 0


def _cmd_serve(args) -> int:
    service.serve(str(args.data_dir), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
