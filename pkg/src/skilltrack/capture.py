"""Session lifecycle and offline-first batch sync.

A client opens a session at a location, records whatever it sees (any subset
of workflow items, any order), lets each student sign out against a frozen
feedback snapshot, and finally signs the staff member out, which commits the
session and emits a CaptureBatch. Batches travel as self-contained JSON
documents and apply to a SyncStore atomically and idempotently: the same
batch_id twice is a no-op, a single invalid observation rejects the whole
batch, and distinct committed sessions commute, so out-of-order delivery from
offline clients is safe.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, field
from datetime import datetime

from .domain import (
    FeedbackItem,
    FeedbackSnapshot,
    Observation,
    Session,
    SessionState,
    SkillTrackError,
    StudentLockState,
    LockedRecord,
    UnknownReference,
    as_utc,
    validate_observation,
)
from .registry import Registry


class EmptyStudentSet(SkillTrackError):
    kind = "empty-student-set"


class NotInAttendance(SkillTrackError):
    kind = "not-in-attendance"


class ItemNotInLocationWorkflows(SkillTrackError):
    kind = "item-not-in-location-workflows"


class AlreadySignedOut(SkillTrackError):
    kind = "already-signed-out"


class StudentsStillOpen(SkillTrackError):
    kind = "students-still-open"


class AlreadyCommitted(SkillTrackError):
    kind = "already-committed"


class MalformedBatch(SkillTrackError):
    kind = "malformed-batch"


# -- lifecycle -----------------------------------------------------------------

def open_session(
    registry: Registry,
    location_id: str,
    staff_id: str,
    student_ids,
    now: datetime,
    session_id: str | None = None,
) -> Session:
    """Start a session; the location decides which workflows it offers.

    The signed-in staff member is whoever opens the session, so covering for a
    colleague is just opening with the substitute's id.
    """
    location = registry.locations.get(location_id)
    if location is None:
        raise UnknownReference(f"unknown location {location_id}")
    if staff_id not in registry.staff:
        raise UnknownReference(f"unknown staff {staff_id}")
    students = frozenset(student_ids)
    if not students:
        raise EmptyStudentSet("cannot open a session with no students")
    for sid in students:
        if sid not in registry.students:
            raise UnknownReference(f"unknown student {sid}")
    return Session(
        id=session_id or f"sess-{uuid.uuid4().hex}",
        location_id=location_id,
        staff_id=staff_id,
        student_ids=students,
        opened_at=as_utc(now),
        offered_procedures=location.available_procedures,
    )


def record(session: Session, registry: Registry, obs: Observation) -> Session:
    """Append one observation to an active session.

    Partial workflows are fine; staff only record what they see.
    """
    if session.state is not SessionState.ACTIVE:
        raise AlreadyCommitted(f"session {session.id} is committed")
    if obs.student_id not in session.student_ids:
        raise NotInAttendance(
            f"student {obs.student_id} not in attendance of {session.id}"
        )
    if session.is_locked(obs.student_id):
        raise LockedRecord(
            f"record locked: student {obs.student_id} signed out of {session.id}"
        )
    if obs.procedure_id not in session.offered_procedures:
        raise ItemNotInLocationWorkflows(
            f"procedure {obs.procedure_id} not offered at {session.location_id}"
        )
    validate_observation(obs, registry, session)
    session.observations.append(obs)
    return session


def student_signout(session: Session, student_id: str, now: datetime) -> Session:
    """Lock a student's record and freeze their feedback snapshot."""
    if session.state is not SessionState.ACTIVE:
        raise AlreadyCommitted(f"session {session.id} is committed")
    if student_id not in session.student_ids:
        raise NotInAttendance(f"student {student_id} not in session {session.id}")
    if session.is_locked(student_id):
        raise AlreadySignedOut(f"student {student_id} already signed out")
    items = tuple(
        FeedbackItem(
            observation_id=o.id,
            workflow_item_id=o.workflow_item_id,
            indicator=o.indicator,
            comment=o.comment,
        )
        for o in session.observations
        if o.student_id == student_id
    )
    session.feedback[student_id] = FeedbackSnapshot(
        student_id=student_id, signed_out_at=as_utc(now), items=items
    )
    session.student_states[student_id] = StudentLockState.SIGNED_OUT
    return session


@dataclass(frozen=True)
class CaptureBatch:
    """Committed session payload plus idempotency key, ready for upload."""

    batch_id: str
    client_id: str
    session: Session
    observations: tuple[Observation, ...]
    feedback: tuple[FeedbackSnapshot, ...]


def staff_signout(
    session: Session,
    now: datetime,
    client_id: str = "client",
    batch_id: str | None = None,
) -> CaptureBatch:
    """Commit the session (requires every student signed out) and emit a batch."""
    if session.state is not SessionState.ACTIVE:
        raise AlreadyCommitted(f"session {session.id} already committed")
    still_open = sorted(
        s for s in session.student_ids if not session.is_locked(s)
    )
    if still_open:
        raise StudentsStillOpen(
            f"students still open in {session.id}: {', '.join(still_open)}"
        )
    session.closed_at = as_utc(now)
    session.state = SessionState.COMMITTED
    return CaptureBatch(
        batch_id=batch_id or f"batch-{uuid.uuid4().hex}",
        client_id=client_id,
        session=session,
        observations=tuple(session.observations),
        feedback=tuple(session.feedback[s] for s in sorted(session.feedback)),
    )


# -- wire format ---------------------------------------------------------------

def batch_to_json(batch: CaptureBatch) -> str:
    sess = batch.session
    doc = {
        "batch_id": batch.batch_id,
        "client_id": batch.client_id,
        "session": {
            "id": sess.id,
            "location_id": sess.location_id,
            "staff_id": sess.staff_id,
            "student_ids": sorted(sess.student_ids),
            "opened_at": sess.opened_at.isoformat(),
            "closed_at": sess.closed_at.isoformat() if sess.closed_at else None,
            "state": sess.state.value,
        },
        "observations": [
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
            for o in batch.observations
        ],
        "feedback": [
            {
                "student_id": f.student_id,
                "signed_out_at": f.signed_out_at.isoformat(),
                "items": [
                    {
                        "observation_id": i.observation_id,
                        "workflow_item_id": i.workflow_item_id,
                        "indicator": i.indicator,
                        "comment": i.comment,
                    }
                    for i in f.items
                ],
            }
            for f in batch.feedback
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def batch_from_json(text: str) -> CaptureBatch:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedBatch(f"batch is not valid JSON: {exc}") from exc
    try:
        s = doc["session"]
        if s["state"] != SessionState.COMMITTED.value:
            raise MalformedBatch("batch session must be committed before upload")
        session = Session(
            id=s["id"],
            location_id=s["location_id"],
            staff_id=s["staff_id"],
            student_ids=frozenset(s["student_ids"]),
            opened_at=datetime.fromisoformat(s["opened_at"]),
            offered_procedures=frozenset(),
            closed_at=datetime.fromisoformat(s["closed_at"]) if s["closed_at"] else None,
            state=SessionState.COMMITTED,
            student_states={
                sid: StudentLockState.SIGNED_OUT for sid in s["student_ids"]
            },
        )
        observations = tuple(
            Observation(
                id=o["id"],
                session_id=session.id,
                student_id=o["student_id"],
                staff_id=o["staff_id"],
                workflow_item_id=o["workflow_item_id"],
                procedure_id=o["procedure_id"],
                indicator=o["indicator"],
                timestamp=datetime.fromisoformat(o["timestamp"]),
                comment=o.get("comment"),
            )
            for o in doc["observations"]
        )
        feedback = tuple(
            FeedbackSnapshot(
                student_id=f["student_id"],
                signed_out_at=datetime.fromisoformat(f["signed_out_at"]),
                items=tuple(
                    FeedbackItem(
                        observation_id=i["observation_id"],
                        workflow_item_id=i["workflow_item_id"],
                        indicator=i["indicator"],
                        comment=i.get("comment"),
                    )
                    for i in f["items"]
                ),
            )
            for f in doc["feedback"]
        )
        session.observations = list(observations)
        session.feedback = {f.student_id: f for f in feedback}
        return CaptureBatch(
            batch_id=doc["batch_id"],
            client_id=doc["client_id"],
            session=session,
            observations=observations,
            feedback=feedback,
        )
    except MalformedBatch:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedBatch(f"batch document malformed: {exc}") from exc


# -- server-side store -----------------------------------------------------------

@dataclass(frozen=True)
class ApplyResult:
    batch_id: str
    applied: bool  # False when the batch_id had already been applied
    session_id: str
    observation_count: int


@dataclass
class SyncStore:
    """Server-side store of committed sessions, fed only through batches.

    apply() is atomic (a batch lands completely or not at all) and idempotent
    per batch_id; committed sessions are independent, so applying distinct
    batches commutes.
    """

    sessions: dict[str, Session] = field(default_factory=dict)
    observations: dict[str, Observation] = field(default_factory=dict)
    batch_of_session: dict[str, str] = field(default_factory=dict)
    applied_batches: set[str] = field(default_factory=set)
    receipt_times: dict[str, datetime] = field(default_factory=dict)

    def apply(
        self,
        registry: Registry,
        batch: CaptureBatch,
        received_at: datetime | None = None,
    ) -> ApplyResult:
        if batch.batch_id in self.applied_batches:
            return ApplyResult(
                batch_id=batch.batch_id,
                applied=False,
                session_id=batch.session.id,
                observation_count=0,
            )
        session = batch.session
        if session.state is not SessionState.COMMITTED or session.closed_at is None:
            raise MalformedBatch(
                f"batch {batch.batch_id} carries an uncommitted session"
            )
        if session.id in self.sessions:
            raise MalformedBatch(
                f"session {session.id} already stored under batch "
                f"{self.batch_of_session[session.id]}"
            )
        if session.location_id not in registry.locations:
            raise UnknownReference(f"unknown location {session.location_id}")
        if session.staff_id not in registry.staff:
            raise UnknownReference(f"unknown staff {session.staff_id}")
        for sid in session.student_ids:
            if sid not in registry.students:
                raise UnknownReference(f"unknown student {sid}")
        seen_ids = set()
        for obs in batch.observations:
            if obs.session_id != session.id:
                raise MalformedBatch(
                    f"observation {obs.id} references a different session"
                )
            if obs.id in seen_ids or obs.id in self.observations:
                raise MalformedBatch(f"duplicate observation id {obs.id}")
            seen_ids.add(obs.id)
            # Committed sessions have every student signed out, so skip the
            # lock check and validate against the open interval directly.
            validate_observation(obs, registry)
            ts = as_utc(obs.timestamp)
            if not (session.opened_at <= ts <= session.closed_at):
                raise MalformedBatch(
                    f"observation {obs.id} outside session interval"
                )
        # Validation passed: commit the whole batch.
        self.sessions[session.id] = session
        self.batch_of_session[session.id] = batch.batch_id
        for obs in batch.observations:
            self.observations[obs.id] = obs
        self.applied_batches.add(batch.batch_id)
        self.receipt_times[batch.batch_id] = (
            as_utc(received_at) if received_at else session.closed_at
        )
        return ApplyResult(
            batch_id=batch.batch_id,
            applied=True,
            session_id=session.id,
            observation_count=len(batch.observations),
        )

    def state_hash(self) -> str:
        """Content hash of the store, independent of insertion order."""
        payload = {
            "sessions": sorted(
                (
                    s.id,
                    s.location_id,
                    s.staff_id,
                    tuple(sorted(s.student_ids)),
                    s.opened_at.isoformat(),
                    s.closed_at.isoformat() if s.closed_at else "",
                )
                for s in self.sessions.values()
            ),
            "observations": sorted(
                (
                    o.id,
                    o.session_id,
                    o.student_id,
                    o.staff_id,
                    o.workflow_item_id,
                    o.procedure_id,
                    o.indicator,
                    o.timestamp.isoformat(),
                    o.comment or "",
                )
                for o in self.observations.values()
            ),
            "batches": sorted(self.batch_of_session.items()),
        }
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def sync(
    store: SyncStore,
    registry: Registry,
    batch: CaptureBatch,
    received_at: datetime | None = None,
) -> ApplyResult:
    """Apply one uploaded batch to the store (see SyncStore.apply)."""
    return store.apply(registry, batch, received_at=received_at)


def batches_from_log(log) -> "list[CaptureBatch]":
    """Wrap a columnar observation log as one committed batch per session.

    This is how generated cohorts travel: the emitted JSONL of batches is both
    the log file format and valid sync input.
    """
    from datetime import timezone as _tz
    from datetime import datetime as _datetime

    def at(epoch: int) -> datetime:
        return _datetime.fromtimestamp(int(epoch), tz=_tz.utc)

    ids = log.obs_ids()
    by_session: dict[int, list[int]] = {}
    for i in range(len(log)):
        by_session.setdefault(int(log.session[i]), []).append(i)
    batches = []
    for code, info in enumerate(log.sessions):
        rows = by_session.get(code, [])
        observations = tuple(
            Observation(
                id=str(ids[i]),
                session_id=info.id,
                student_id=log.students[int(log.student[i])],
                staff_id=log.staff[int(log.staff_member[i])],
                workflow_item_id=log.items[int(log.item[i])],
                procedure_id=log.procedures[int(log.procedure[i])],
                indicator=int(log.indicator[i]),
                timestamp=at(log.ts[i]),
            )
            for i in rows
        )
        session = Session(
            id=info.id,
            location_id=info.location_id,
            staff_id=info.staff_id,
            student_ids=frozenset(info.student_ids),
            opened_at=at(info.opened_at),
            offered_procedures=frozenset(),
            closed_at=at(info.closed_at),
            state=SessionState.COMMITTED,
            student_states={
                s: StudentLockState.SIGNED_OUT for s in info.student_ids
            },
        )
        session.observations = list(observations)
        batches.append(
            CaptureBatch(
                batch_id=f"batch-{info.id}",
                client_id="synth",
                session=session,
                observations=observations,
                feedback=(),
            )
        )
    return batches
