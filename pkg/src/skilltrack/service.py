"""HTTP facade over the persistent state.

Resource-oriented JSON endpoints, one per report or command:

    POST /registry                     load an entity-definition document (YAML body)
    POST /sync                         apply a capture batch (JSON body)
    GET  /coverage                     evidence per outcome
    GET  /students/{id}/consistency    ?scope=&scope_id=&threshold=&last_n=&from=&to=
    GET  /students/{id}/barcode        same query parameters
    GET  /students/{id}/portfolio      ?min_experience=&sufficiency_threshold=&threshold=
    GET  /staff/{id}/calibration
    GET  /sessions                     committed session summaries
    GET  /sessions/{id}                one session with its observations
    POST /exams/generate               {constraints, size_limit, history?}
    POST /plans                        {students, slots, config?}
    POST /questions/{id}/result        {correct}

Every report endpoint returns exactly the bytes of the corresponding
``*_payload`` builder below, so library callers and HTTP clients can be
diffed byte for byte. Reads run against immutable snapshots; writes serialize
through the persistent state's lock.
"""

from __future__ import annotations

import datetime as _dt
import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qs, urlparse

from . import analytics, capture, mapping, scheduling
from .domain import SkillTrackError
from .eventlog import PersistentState, ServerState
from .registry import ParseError


def _canonical(doc: Any) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


class ApiError(SkillTrackError):
    kind = "api-error"

    def __init__(self, message: str, status: int = 400, kind: str | None = None):
        super().__init__(message)
        self.status = status
        if kind:
            self.kind = kind


# -- payload builders (shared by HTTP handlers and tests) -----------------------

def consistency_payload(state: ServerState, student_id: str, query_params: dict) -> bytes:
    query = _consistency_query(student_id, query_params)
    result = analytics.sessional_consistency(
        state.observation_log(), query, edges=state.edges()
    )
    return _canonical(
        {
            "student_id": student_id,
            "scope": query.scope.kind.value,
            "scope_id": query.scope.id,
            "threshold": query.threshold,
            "numerator": result.numerator,
            "denominator": result.denominator,
            "consistency": result.fraction,
        }
    )


def barcode_payload(state: ServerState, student_id: str, query_params: dict) -> bytes:
    query = _consistency_query(student_id, query_params)
    code = analytics.barcode(state.observation_log(), query, edges=state.edges())
    return _canonical(
        {
            "student_id": student_id,
            "scope": query.scope.kind.value,
            "scope_id": query.scope.id,
            "threshold": code.threshold,
            "text": code.text(),
            "cells": [
                {
                    "observation_id": c.observation_id,
                    "timestamp": c.ts,
                    "indicator": c.indicator,
                    "meets": c.meets,
                }
                for c in code.cells
            ],
        }
    )


def portfolio_payload(state: ServerState, student_id: str, query_params: dict) -> bytes:
    config = analytics.PortfolioConfig(
        min_experience=int(query_params.get("min_experience", 5)),
        sufficiency_threshold=float(query_params.get("sufficiency_threshold", 0.8)),
        indicator_threshold=int(query_params.get("threshold", analytics.DEFAULT_THRESHOLD)),
    )
    entries = analytics.portfolio(
        state.observation_log(), state.registry, student_id, config
    )
    return _canonical(
        {
            "student_id": student_id,
            "entries": [
                {
                    "procedure_id": e.procedure_id,
                    "experience": e.experience,
                    "consistency": e.consistency,
                    "sufficient": e.sufficient,
                }
                for e in entries
            ],
        }
    )


def calibration_payload(state: ServerState, staff_id: str | None = None) -> bytes:
    report = analytics.calibration_report(state.observation_log())
    staff = [
        {
            "staff_id": s.staff_id,
            "observations": s.observation_count,
            "histogram": list(s.histogram),
            "distinct_points_used": s.distinct_points_used,
            "mean_offset": s.mean_offset,
            "tv_distance": s.tv_distance,
        }
        for s in report.staff
        if staff_id is None or s.staff_id == staff_id
    ]
    if staff_id is not None:
        if not staff:
            raise ApiError(f"no observations for staff {staff_id}", 404, "not-found")
        return _canonical(staff[0])
    return _canonical({"staff": staff})


def coverage_payload(state: ServerState) -> bytes:
    report = mapping.coverage_report(
        state.registry, state.edges(), state.observation_log()
    )
    return _canonical(
        {
            "rows": [
                {
                    "outcome_id": r.outcome_id,
                    "wba_items": r.wba_items,
                    "teaching_units": r.teaching_units,
                    "questions": r.questions,
                    "observations": r.observations,
                    "question_attempts": r.question_attempts,
                }
                for r in report.rows
            ]
        }
    )


def sessions_payload(state: ServerState) -> bytes:
    return _canonical(
        {
            "sessions": [
                _session_summary(state, sid)
                for sid in sorted(state.store.sessions)
            ]
        }
    )


def session_payload(state: ServerState, session_id: str) -> bytes:
    if session_id not in state.store.sessions:
        raise ApiError(f"unknown session {session_id}", 404, "not-found")
    doc = _session_summary(state, session_id)
    session = state.store.sessions[session_id]
    doc["observations"] = [
        {
            "id": o.id,
            "student_id": o.student_id,
            "staff_id": o.staff_id,
            "workflow_item_id": o.workflow_item_id,
            "procedure_id": o.procedure_id,
            "indicator": o.indicator,
            "timestamp": o.timestamp.isoformat(),
            "comment": o.comment,
        }
        for o in session.observations
    ]
    return _canonical(doc)


def _session_summary(state: ServerState, session_id: str) -> dict:
    s = state.store.sessions[session_id]
    return {
        "id": s.id,
        "location_id": s.location_id,
        "staff_id": s.staff_id,
        "student_ids": sorted(s.student_ids),
        "opened_at": s.opened_at.isoformat(),
        "closed_at": s.closed_at.isoformat() if s.closed_at else None,
        "state": s.state.value,
        "observation_count": len(s.observations),
        "batch_id": state.store.batch_of_session.get(session_id),
    }


def _consistency_query(student_id: str, params: dict) -> analytics.ConsistencyQuery:
    scope_kind = params.get("scope", "all")
    try:
        kind = analytics.ScopeKind(scope_kind)
    except ValueError:
        raise ApiError(f"unknown scope {scope_kind!r}", 400, "invalid-query") from None
    window = None
    if any(k in params for k in ("last_n", "from", "to")):
        window = analytics.Window(
            ts_from=int(params["from"]) if "from" in params else None,
            ts_to=int(params["to"]) if "to" in params else None,
            last_n=int(params["last_n"]) if "last_n" in params else None,
        )
    return analytics.ConsistencyQuery(
        student_id=student_id,
        scope=analytics.Scope(kind=kind, id=params.get("scope_id")),
        threshold=int(params.get("threshold", analytics.DEFAULT_THRESHOLD)),
        window=window,
    )


# -- command handlers -------------------------------------------------------------

def handle_sync(persistent: PersistentState, body: bytes) -> bytes:
    batch = capture.batch_from_json(body.decode("utf-8"))
    result = persistent.import_batch(batch)
    return _canonical(
        {
            "batch_id": result.batch_id,
            "applied": result.applied,
            "session_id": result.session_id,
            "observation_count": result.observation_count,
        }
    )


def handle_load_registry(persistent: PersistentState, body: bytes) -> bytes:
    registry = persistent.load_registry(body.decode("utf-8"))
    return _canonical(
        {
            "outcomes": len(registry.outcomes),
            "procedures": len(registry.procedures),
            "items": len(registry.items),
            "staff": len(registry.staff),
            "students": len(registry.students),
            "locations": len(registry.locations),
            "questions": len(registry.questions),
            "teaching": len(registry.teaching),
        }
    )


def handle_generate_exam(persistent: PersistentState, body: bytes) -> bytes:
    doc = _parse_json(body)
    constraints = [
        mapping.BlueprintConstraint(
            outcome_id=c["outcome_id"],
            min_questions=int(c.get("min_questions", 0)),
            max_questions=(
                int(c["max_questions"]) if c.get("max_questions") is not None else None
            ),
        )
        for c in doc.get("constraints", [])
    ]
    try:
        exam = mapping.generate_exam(
            persistent.state.registry.questions.values(),
            constraints,
            size_limit=int(doc.get("size_limit", 1)),
            history={str(k): int(v) for k, v in doc.get("history", {}).items()},
        )
    except mapping.InfeasibleBlueprint as exc:
        raise ApiError(
            str(exc), 422, "infeasible-blueprint"
        ) from exc
    return _canonical({"exam": exam})


def handle_create_plan(persistent: PersistentState, body: bytes) -> bytes:
    doc = _parse_json(body)
    config_doc = doc.get("config", {})
    config = scheduling.PlanConfig(
        hold_consistency=float(config_doc.get("hold_consistency", 0.9)),
        hold_min_experience=int(config_doc.get("hold_min_experience", 5)),
        weight_consistency=float(config_doc.get("weight_consistency", 1.0)),
        weight_experience=float(config_doc.get("weight_experience", 1.0)),
        min_experience=int(config_doc.get("min_experience", 5)),
    )
    slots = [
        scheduling.PatientSlot(
            slot_id=s["slot_id"],
            procedure_id=s["procedure_id"],
            date=_dt.date.fromisoformat(s.get("date", "1970-01-01")),
            capacity=int(s.get("capacity", 1)),
        )
        for s in doc.get("slots", [])
    ]
    students = [str(s) for s in doc.get("students", [])]
    result = persistent.create_plan(students, slots, config)
    return _canonical(
        {
            "assignments": [
                {
                    "student_id": a.student_id,
                    "slot_id": a.slot_id,
                    "procedure_id": a.procedure_id,
                }
                for a in result.assignments
            ],
            "holding": [
                {
                    "student_id": h.student_id,
                    "procedure_id": h.procedure_id,
                    "reason": h.reason,
                }
                for h in result.holding
            ],
            "unassigned": [
                {"student_id": s, "procedure_id": p} for s, p in result.unassigned
            ],
        }
    )


def handle_question_result(
    persistent: PersistentState, question_id: str, body: bytes
) -> bytes:
    doc = _parse_json(body)
    if "correct" not in doc:
        raise ApiError("body must carry a boolean 'correct'", 400, "invalid-query")
    perf = persistent.record_question_result(question_id, bool(doc["correct"]))
    return _canonical(
        {
            "question_id": perf.question_id,
            "attempts": perf.attempts,
            "difficulty": perf.difficulty,
        }
    )


def _parse_json(body: bytes) -> dict:
    try:
        doc = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ApiError(f"body is not valid JSON: {exc}", 400, "parse-error") from exc
    if not isinstance(doc, dict):
        raise ApiError("body must be a JSON object", 400, "parse-error")
    return doc


# -- the server itself --------------------------------------------------------------

class _Handler(BaseHTTPRequestHandler):
    persistent: PersistentState  # set by make_server

    def log_message(self, fmt, *args):  # keep tests quiet
        pass

    def _send(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, kind: str, message: str) -> None:
        self._send(status, _canonical({"error": kind, "detail": message}))

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0))
        return self.rfile.read(length) if length else b""

    def do_OPTIONS(self):  # CORS preflight for browser clients
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self):
        url = urlparse(self.path)
        params = {k: v[-1] for k, v in parse_qs(url.query).items()}
        parts = [p for p in url.path.split("/") if p]
        state = self.persistent.state
        try:
            if parts == ["coverage"]:
                return self._send(200, coverage_payload(state))
            if parts == ["sessions"]:
                return self._send(200, sessions_payload(state))
            if len(parts) == 2 and parts[0] == "sessions":
                return self._send(200, session_payload(state, parts[1]))
            if len(parts) == 3 and parts[0] == "students":
                student_id, what = parts[1], parts[2]
                if what == "consistency":
                    return self._send(200, consistency_payload(state, student_id, params))
                if what == "barcode":
                    return self._send(200, barcode_payload(state, student_id, params))
                if what == "portfolio":
                    return self._send(200, portfolio_payload(state, student_id, params))
            if len(parts) == 3 and parts[0] == "staff" and parts[2] == "calibration":
                return self._send(200, calibration_payload(state, parts[1]))
            self._error(404, "not-found", f"no such resource {url.path}")
        except ApiError as exc:
            self._error(exc.status, exc.kind, str(exc))
        except SkillTrackError as exc:
            self._error(400, exc.kind, str(exc))

    def do_POST(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        body = self._body()
        try:
            if parts == ["registry"]:
                return self._send(200, handle_load_registry(self.persistent, body))
            if parts == ["sync"]:
                return self._send(200, handle_sync(self.persistent, body))
            if parts == ["exams", "generate"]:
                return self._send(200, handle_generate_exam(self.persistent, body))
            if parts == ["plans"]:
                return self._send(200, handle_create_plan(self.persistent, body))
            if len(parts) == 3 and parts[0] == "questions" and parts[2] == "result":
                return self._send(
                    200, handle_question_result(self.persistent, parts[1], body)
                )
            self._error(404, "not-found", f"no such resource {url.path}")
        except ApiError as exc:
            self._error(exc.status, exc.kind, str(exc))
        except ParseError as exc:
            self._error(400, exc.kind, str(exc))
        except SkillTrackError as exc:
            self._error(409, exc.kind, str(exc))


def make_server(
    persistent: PersistentState, host: str = "127.0.0.1", port: int = 0
) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port."""
    handler = type("Handler", (_Handler,), {"persistent": persistent})
    try:
        return ThreadingHTTPServer((host, port), handler)
    except OSError as exc:
        raise ApiError(f"cannot bind {host}:{port}: {exc}", 500, "port-in-use") from exc


def serve(data_dir: str, host: str = "127.0.0.1", port: int = 8420) -> None:
    """Run the service until interrupted (state recovered from the event log)."""
    persistent = PersistentState(data_dir)
    server = make_server(persistent, host=host, port=port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
