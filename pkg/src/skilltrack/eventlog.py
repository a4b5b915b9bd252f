"""Append-only event log, snapshots, and the replayable server state.

Every state change (registry load, batch application, question result, plan
creation) is appended to ``events.jsonl`` with a strictly increasing sequence
number before it mutates memory, so state at any quiescent point equals a
replay of the log. Snapshots (written every ``snapshot_every`` events) shortcut
replay; imported documents are kept verbatim under ``imported/`` for audit.
A truncated or inconsistent log refuses to load and reports the last valid
sequence number.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Sequence

from . import analytics, capture, mapping, scheduling
from .capture import CaptureBatch, SyncStore, batch_from_json, batch_to_json
from .domain import SkillTrackError
from .obslog import ObservationLog
from .registry import Registry, registry_load, serialize


class CorruptLog(SkillTrackError):
    kind = "corrupt-log"

    def __init__(self, message: str, last_valid_seq: int) -> None:
        super().__init__(message)
        self.last_valid_seq = last_valid_seq


@dataclass(frozen=True)
class EventRecord:
    seq: int
    record_kind: str  # batch-applied | registry-loaded | question-result | plan-created
    received_at: str  # ISO timestamp
    payload: dict


def _now_iso() -> str:
    return datetime.now(tz=timezone.utc).isoformat()


class EventLog:
    """JSONL event file with strictly increasing sequence numbers."""

    def __init__(self, path: Path) -> None:
        self.path = path

    def append(self, record: EventRecord) -> None:
        line = json.dumps(
            {
                "seq": record.seq,
                "kind": record.record_kind,
                "received_at": record.received_at,
                "payload": record.payload,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()

    def replay(self, after_seq: int = 0) -> Iterator[EventRecord]:
        """Yield records with seq > after_seq; raise CorruptLog on damage."""
        if not self.path.exists():
            return
        last = 0
        with self.path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped:
                    continue
                try:
                    doc = json.loads(stripped)
                    seq = int(doc["seq"])
                    record = EventRecord(
                        seq=seq,
                        record_kind=str(doc["kind"]),
                        received_at=str(doc["received_at"]),
                        payload=dict(doc["payload"]),
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise CorruptLog(
                        f"unreadable event at line {lineno}; "
                        f"last valid sequence {last}",
                        last_valid_seq=last,
                    ) from exc
                if seq <= last:
                    raise CorruptLog(
                        f"sequence {seq} at line {lineno} not increasing; "
                        f"last valid sequence {last}",
                        last_valid_seq=last,
                    )
                last = seq
                if seq > after_seq:
                    yield record


class ServerState:
    """In-memory state fed exclusively by events (directly or via replay)."""

    def __init__(self) -> None:
        self.registry = Registry()
        self.store = SyncStore()
        self.plans: list[dict] = []
        self.seq = 0
        self._log_cache: tuple[int, ObservationLog] | None = None
        self._store_version = 0

    # -- event application -------------------------------------------------

    def apply_event(self, record: EventRecord) -> None:
        kind = record.record_kind
        if kind == "registry-loaded":
            self.registry = registry_load(record.payload["document"])
        elif kind == "batch-applied":
            batch = batch_from_json(json.dumps(record.payload["batch"]))
            self.store.apply(self.registry, batch)
            self._store_version += 1
        elif kind == "question-result":
            mapping.record_question_result(
                self.registry.questions,
                record.payload["question_id"],
                bool(record.payload["correct"]),
            )
        elif kind == "plan-created":
            self.plans.append(record.payload)
        else:
            raise CorruptLog(
                f"unknown event kind {kind!r}", last_valid_seq=self.seq
            )
        self.seq = record.seq

    # -- derived snapshots ---------------------------------------------------

    def observation_log(self) -> ObservationLog:
        cached = self._log_cache
        if cached is not None and cached[0] == self._store_version:
            return cached[1]
        log = ObservationLog.from_observations(
            sorted(self.store.observations.values(), key=lambda o: o.id),
            self.store.sessions,
        )
        self._log_cache = (self._store_version, log)
        return log

    def edges(self) -> frozenset[mapping.MappingEdge]:
        return mapping.edges_from_registry(self.registry)


class PersistentState:
    """Disk-backed ServerState: write-ahead events plus periodic snapshots."""

    def __init__(self, data_dir: str | Path, snapshot_every: int = 500) -> None:
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        (self.data_dir / "imported").mkdir(exist_ok=True)
        (self.data_dir / "snapshots").mkdir(exist_ok=True)
        self.snapshot_every = snapshot_every
        self.events = EventLog(self.data_dir / "events.jsonl")
        self.state = ServerState()
        self._lock = threading.Lock()
        self._recover()

    # -- recovery ------------------------------------------------------------

    def _snapshot_paths(self) -> list[Path]:
        return sorted((self.data_dir / "snapshots").glob("snapshot-*.json"))

    def _recover(self) -> None:
        snapshots = self._snapshot_paths()
        if snapshots:
            self._load_snapshot(snapshots[-1])
        for record in self.events.replay(after_seq=self.state.seq):
            self.state.apply_event(record)

    def _load_snapshot(self, path: Path) -> None:
        doc = json.loads(path.read_text(encoding="utf-8"))
        state = ServerState()
        if doc.get("registry_document"):
            state.registry = registry_load(doc["registry_document"])
        for batch_doc in doc.get("batches", []):
            batch = batch_from_json(json.dumps(batch_doc))
            state.store.apply(state.registry, batch)
            state._store_version += 1
        for qid, (attempts, correct) in doc.get("question_usage", {}).items():
            q = state.registry.questions.get(qid)
            if q is not None:
                q.attempts, q.correct = int(attempts), int(correct)
        state.plans = list(doc.get("plans", []))
        state.seq = int(doc["seq"])
        self.state = state

    def save_snapshot(self) -> Path:
        state = self.state
        doc = {
            "seq": state.seq,
            "registry_document": serialize(state.registry),
            "batches": [
                json.loads(batch_to_json(_batch_of(state.store, sid)))
                for sid in sorted(state.store.sessions)
            ],
            "question_usage": {
                q.id: [q.attempts, q.correct]
                for q in state.registry.questions.values()
                if q.attempts
            },
            "plans": state.plans,
        }
        path = self.data_dir / "snapshots" / f"snapshot-{state.seq:08d}.json"
        path.write_text(
            json.dumps(doc, sort_keys=True, separators=(",", ":")), encoding="utf-8"
        )
        return path

    # -- commands -------------------------------------------------------------

    def _append(self, kind: str, payload: dict) -> EventRecord:
        record = EventRecord(
            seq=self.state.seq + 1,
            record_kind=kind,
            received_at=_now_iso(),
            payload=payload,
        )
        self.events.append(record)
        return record

    def load_registry(self, document: str) -> Registry:
        with self._lock:
            # Validate before logging; a bad document must not enter the log.
            registry_load(document)
            record = self._append("registry-loaded", {"document": document})
            self.state.apply_event(record)
            path = self.data_dir / "imported" / f"{record.seq:08d}-registry.yaml"
            path.write_text(document, encoding="utf-8")
            self._maybe_snapshot()
            return self.state.registry

    def import_batch(self, batch: CaptureBatch) -> capture.ApplyResult:
        with self._lock:
            probe = _rehearse_batch(self.state, batch)
            if not probe.applied:
                return probe
            record = self._append(
                "batch-applied", {"batch": json.loads(batch_to_json(batch))}
            )
            self.state.apply_event(record)
            self._maybe_snapshot()
            return capture.ApplyResult(
                batch_id=batch.batch_id,
                applied=True,
                session_id=batch.session.id,
                observation_count=len(batch.observations),
            )

    def record_question_result(self, question_id: str, correct: bool):
        with self._lock:
            if question_id not in self.state.registry.questions:
                raise mapping.UnknownQuestion(f"unknown question {question_id}")
            record = self._append(
                "question-result",
                {"question_id": question_id, "correct": bool(correct)},
            )
            self.state.apply_event(record)
            self._maybe_snapshot()
            return mapping.question_performance(
                self.state.registry.questions, question_id
            )

    def create_plan(
        self,
        students: Sequence[str],
        slots: Sequence[scheduling.PatientSlot],
        config: scheduling.PlanConfig,
    ) -> scheduling.AllocationPlan:
        with self._lock:
            snapshot = build_snapshot(
                self.state.observation_log(), self.state.registry, config
            )
            result = scheduling.plan(students, slots, snapshot, config)
            payload = {
                "students": sorted(set(students)),
                "slots": [
                    {
                        "slot_id": s.slot_id,
                        "procedure_id": s.procedure_id,
                        "date": s.date.isoformat(),
                        "capacity": s.capacity,
                    }
                    for s in slots
                ],
                "config": {
                    "hold_consistency": config.hold_consistency,
                    "hold_min_experience": config.hold_min_experience,
                    "weight_consistency": config.weight_consistency,
                    "weight_experience": config.weight_experience,
                    "min_experience": config.min_experience,
                },
                "plan": {
                    "assignments": [
                        [a.student_id, a.slot_id, a.procedure_id]
                        for a in result.assignments
                    ],
                    "holding": [
                        [h.student_id, h.procedure_id, h.reason]
                        for h in result.holding
                    ],
                    "unassigned": [list(u) for u in result.unassigned],
                },
            }
            record = self._append("plan-created", payload)
            self.state.apply_event(record)
            self._maybe_snapshot()
            return result

    def _maybe_snapshot(self) -> None:
        if self.snapshot_every and self.state.seq % self.snapshot_every == 0:
            self.save_snapshot()


def _rehearse_batch(state: ServerState, batch: CaptureBatch) -> capture.ApplyResult:
    """Dry-run a batch against a throwaway copy of the store.

    Keeps invalid batches out of the event log so replay never fails, and
    resolves idempotent re-sends without logging a second event.
    """
    if batch.batch_id in state.store.applied_batches:
        return capture.ApplyResult(
            batch_id=batch.batch_id,
            applied=False,
            session_id=batch.session.id,
            observation_count=0,
        )
    trial = SyncStore(
        sessions=dict(state.store.sessions),
        observations=dict(state.store.observations),
        batch_of_session=dict(state.store.batch_of_session),
        applied_batches=set(state.store.applied_batches),
        receipt_times=dict(state.store.receipt_times),
    )
    return trial.apply(state.registry, batch)


def _batch_of(store: SyncStore, session_id: str) -> CaptureBatch:
    session = store.sessions[session_id]
    return CaptureBatch(
        batch_id=store.batch_of_session[session_id],
        client_id="snapshot",
        session=session,
        observations=tuple(session.observations),
        feedback=tuple(session.feedback[s] for s in sorted(session.feedback)),
    )


def build_snapshot(
    log: ObservationLog,
    registry: Registry,
    config: scheduling.PlanConfig,
) -> dict[tuple[str, str], scheduling.SkillSnapshot]:
    """Per-(student, procedure) consistency/experience for the planner."""
    snapshot: dict[tuple[str, str], scheduling.SkillSnapshot] = {}
    pconfig = analytics.PortfolioConfig(min_experience=config.min_experience)
    for student_id in registry.students:
        for entry in analytics.portfolio(log, registry, student_id, pconfig):
            snapshot[(student_id, entry.procedure_id)] = scheduling.SkillSnapshot(
                consistency=entry.consistency, experience=entry.experience
            )
    return snapshot
