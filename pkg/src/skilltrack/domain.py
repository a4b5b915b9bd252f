"""Shared entities, identifier rules and observation validation.

Everything downstream (mapping, capture, analytics, scheduling) builds on the
types defined here. Entities are plain dataclasses validated at construction
time; after an entity exists, its invariants hold. Identifiers are opaque
case-sensitive strings of at most 64 bytes. The observation scale is ordinal
1..6; only the integer is stored, display labels live in INDICATOR_LABELS.
"""

from __future__ import annotations

import enum
import unicodedata
from dataclasses import dataclass, field
from datetime import date, datetime, timezone


INDICATOR_MIN = 1
INDICATOR_MAX = 6

# Display labels for the 1..6 developmental scale, ordered by learner
# independence. Analytics only ever use the integer.
INDICATOR_LABELS = {
    1: "not observed to standard",
    2: "heavily assisted",
    3: "assisted",
    4: "minimal guidance",
    5: "independent",
    6: "independent and fluent",
}

MAX_ID_BYTES = 64
MAX_COMMENT_CHARS = 2000


class SkillTrackError(Exception):
    """Base error. `kind` is a stable machine-readable slug."""

    kind = "error"

    def __str__(self) -> str:  # pragma: no cover - trivial
        return super().__str__() or self.kind


class ScaleViolation(SkillTrackError):
    kind = "scale-violation"


class UnknownReference(SkillTrackError):
    kind = "unknown-reference"


class ItemProcedureMismatch(SkillTrackError):
    kind = "item-procedure-mismatch"


class LockedRecord(SkillTrackError):
    kind = "locked-record"


class TimestampOutOfRange(SkillTrackError):
    kind = "timestamp-out-of-range"


class InvalidEntity(SkillTrackError):
    kind = "invalid-entity"


def _check_id(value: str, what: str) -> str:
    if not isinstance(value, str) or not value:
        raise InvalidEntity(f"{what} id must be a non-empty string")
    if len(value.encode("utf-8")) > MAX_ID_BYTES:
        raise InvalidEntity(f"{what} id exceeds {MAX_ID_BYTES} bytes: {value!r}")
    return value


# Control and line/paragraph separator characters would corrupt the
# single-line table exports and do not round-trip through the document format.
_FORBIDDEN_TEXT_CATEGORIES = frozenset({"Cc", "Zl", "Zp"})


def _check_text(value: str, what: str, multiline: bool = False) -> str:
    if not isinstance(value, str):
        raise InvalidEntity(f"{what} must be a string")
    for ch in value:
        if unicodedata.category(ch) in _FORBIDDEN_TEXT_CATEGORIES:
            if multiline and ch in "\n\t":
                continue
            raise InvalidEntity(f"{what} contains control character {ch!r}")
    return value


def validate_indicator(value: int) -> int:
    """Reject anything outside the 1..6 developmental scale."""
    if not isinstance(value, int) or isinstance(value, bool):
        raise ScaleViolation(f"indicator must be an integer, got {value!r}")
    if not (INDICATOR_MIN <= value <= INDICATOR_MAX):
        raise ScaleViolation(
            f"indicator {value} outside scale [{INDICATOR_MIN}, {INDICATOR_MAX}]"
        )
    return value


def as_utc(ts: datetime) -> datetime:
    """Normalize a timestamp to aware UTC; naive input is taken as UTC."""
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


class Authority(str, enum.Enum):
    INTERNAL = "internal"
    EXTERNAL = "external-stakeholder"


@dataclass(frozen=True)
class LearningOutcome:
    id: str
    label: str
    authority: Authority = Authority.INTERNAL

    def __post_init__(self) -> None:
        _check_id(self.id, "outcome")
        _check_text(self.label, "outcome label")
        object.__setattr__(self, "authority", Authority(self.authority))


@dataclass(frozen=True)
class WorkflowItem:
    """One observable step of a procedure.

    Position is not stored: it is the index of the item id inside each
    procedure's workflow list, so an item shared by several procedures can sit
    at a different position in each.
    """

    id: str
    label: str
    outcome_ids: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        _check_id(self.id, "item")
        _check_text(self.label, "item label")
        object.__setattr__(self, "outcome_ids", frozenset(self.outcome_ids))


@dataclass(frozen=True)
class Procedure:
    id: str
    label: str
    workflow: tuple[str, ...]

    def __post_init__(self) -> None:
        _check_id(self.id, "procedure")
        _check_text(self.label, "procedure label")
        object.__setattr__(self, "workflow", tuple(self.workflow))
        if not self.workflow:
            raise InvalidEntity(f"procedure {self.id} has an empty workflow")
        if len(set(self.workflow)) != len(self.workflow):
            raise InvalidEntity(f"procedure {self.id} repeats a workflow item")

    def position_of(self, item_id: str) -> int:
        """0-based position of an item in this procedure's workflow."""
        try:
            return self.workflow.index(item_id)
        except ValueError:
            raise ItemProcedureMismatch(
                f"item {item_id} not in workflow of procedure {self.id}"
            ) from None


@dataclass(frozen=True)
class TeachingUnit:
    """A taught element that maps to outcomes but produces no event data."""

    id: str
    label: str
    outcome_ids: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        _check_id(self.id, "teaching unit")
        _check_text(self.label, "teaching unit label")
        object.__setattr__(self, "outcome_ids", frozenset(self.outcome_ids))


@dataclass(frozen=True)
class Student:
    id: str
    cohort: str
    enrollment_date: date

    def __post_init__(self) -> None:
        _check_id(self.id, "student")
        _check_text(self.cohort, "student cohort")


@dataclass(frozen=True)
class StaffMember:
    id: str
    name: str

    def __post_init__(self) -> None:
        _check_id(self.id, "staff")
        _check_text(self.name, "staff name")


@dataclass(frozen=True)
class Location:
    id: str
    name: str
    available_procedures: frozenset[str]

    def __post_init__(self) -> None:
        _check_id(self.id, "location")
        _check_text(self.name, "location name")
        object.__setattr__(
            self, "available_procedures", frozenset(self.available_procedures)
        )
        if not self.available_procedures:
            raise InvalidEntity(f"location {self.id} offers no procedures")


@dataclass
class ExamQuestion:
    """Bank question with cumulative usage counters.

    attempts/correct are the one mutable piece of registry state; the service
    serializes their updates through the event log.
    """

    id: str
    text: str
    outcome_ids: frozenset[str]
    attempts: int = 0
    correct: int = 0

    def __post_init__(self) -> None:
        _check_id(self.id, "question")
        _check_text(self.text, "question text", multiline=True)
        self.outcome_ids = frozenset(self.outcome_ids)
        if not self.outcome_ids:
            raise InvalidEntity(f"question {self.id} maps to no outcomes")
        if not (0 <= self.correct <= self.attempts):
            raise InvalidEntity(
                f"question {self.id}: need 0 <= correct <= attempts "
                f"(got {self.correct}/{self.attempts})"
            )


@dataclass(frozen=True)
class Observation:
    """One staff judgment of one student on one workflow item.

    Sparse by design: a session does not have to cover every workflow item,
    and the same item may be observed more than once.
    """

    id: str
    session_id: str
    student_id: str
    staff_id: str
    workflow_item_id: str
    procedure_id: str
    indicator: int
    timestamp: datetime
    comment: str | None = None

    def __post_init__(self) -> None:
        _check_id(self.id, "observation")
        validate_indicator(self.indicator)
        object.__setattr__(self, "timestamp", as_utc(self.timestamp))
        if self.comment is not None:
            _check_text(self.comment, "observation comment", multiline=True)
            if len(self.comment) > MAX_COMMENT_CHARS:
                raise InvalidEntity(
                    f"observation {self.id}: comment exceeds "
                    f"{MAX_COMMENT_CHARS} chars"
                )


class SessionState(str, enum.Enum):
    ACTIVE = "active"
    COMMITTED = "committed"


class StudentLockState(str, enum.Enum):
    OPEN = "open"
    SIGNED_OUT = "student_signed_out"


@dataclass(frozen=True)
class FeedbackItem:
    observation_id: str
    workflow_item_id: str
    indicator: int
    comment: str | None


@dataclass(frozen=True)
class FeedbackSnapshot:
    """Per-student feedback frozen at sign-out; immutable thereafter."""

    student_id: str
    signed_out_at: datetime
    items: tuple[FeedbackItem, ...]


@dataclass
class Session:
    """One clinical training attempt.

    Lifecycle: active -> (students sign out one by one) -> committed, exactly
    once. Observations for a student are rejected after that student signed
    out; nothing may change after commit. The lifecycle operations live in
    skilltrack.capture.
    """

    id: str
    location_id: str
    staff_id: str
    student_ids: frozenset[str]
    opened_at: datetime
    offered_procedures: frozenset[str]
    closed_at: datetime | None = None
    state: SessionState = SessionState.ACTIVE
    student_states: dict[str, StudentLockState] = field(default_factory=dict)
    observations: list[Observation] = field(default_factory=list)
    feedback: dict[str, FeedbackSnapshot] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _check_id(self.id, "session")
        self.student_ids = frozenset(self.student_ids)
        if not self.student_ids:
            raise InvalidEntity(f"session {self.id} has an empty student set")
        self.opened_at = as_utc(self.opened_at)
        if self.closed_at is not None:
            self.closed_at = as_utc(self.closed_at)
        if not self.student_states:
            self.student_states = {s: StudentLockState.OPEN for s in self.student_ids}

    def is_locked(self, student_id: str) -> bool:
        return self.student_states.get(student_id) == StudentLockState.SIGNED_OUT


def validate_observation(obs, registry, session: Session | None = None):
    """Check an observation against the registry (and optionally its session).

    Pure predicate: raises on the first violated invariant, otherwise returns
    the observation unchanged. Neither the registry nor the observation is
    mutated.

    Raises:
        UnknownReference: any referenced entity is missing from the registry.
        ScaleViolation: indicator outside 1..6.
        ItemProcedureMismatch: item not part of the procedure's workflow.
        LockedRecord: the student already signed out of the session.
        TimestampOutOfRange: timestamp outside the session's open interval.
    """
    validate_indicator(obs.indicator)
    if obs.student_id not in registry.students:
        raise UnknownReference(f"unknown student {obs.student_id}")
    if obs.staff_id not in registry.staff:
        raise UnknownReference(f"unknown staff {obs.staff_id}")
    procedure = registry.procedures.get(obs.procedure_id)
    if procedure is None:
        raise UnknownReference(f"unknown procedure {obs.procedure_id}")
    if obs.workflow_item_id not in registry.items:
        raise UnknownReference(f"unknown item {obs.workflow_item_id}")
    if obs.workflow_item_id not in procedure.workflow:
        raise ItemProcedureMismatch(
            f"item {obs.workflow_item_id} not in workflow of {obs.procedure_id}"
        )
    if session is not None:
        if obs.session_id != session.id:
            raise UnknownReference(
                f"observation {obs.id} references session {obs.session_id}, "
                f"not {session.id}"
            )
        if obs.student_id not in session.student_ids:
            raise UnknownReference(
                f"student {obs.student_id} not in attendance of session {session.id}"
            )
        if session.is_locked(obs.student_id):
            raise LockedRecord(
                f"record locked: student {obs.student_id} signed out of {session.id}"
            )
        ts = as_utc(obs.timestamp)
        if ts < session.opened_at:
            raise TimestampOutOfRange(
                f"observation {obs.id} predates session open time"
            )
        if session.closed_at is not None and ts > session.closed_at:
            raise TimestampOutOfRange(
                f"observation {obs.id} after session close time"
            )
    return obs
