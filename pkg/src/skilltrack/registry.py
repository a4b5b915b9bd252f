"""Entity registry: load, validate and serialize the entity-definition document.

The document is a single YAML file with sections ``outcomes``, ``procedures``,
``items``, ``staff``, ``students``, ``locations`` and ``questions`` (optional
extras: ``teaching`` units and patient ``slots``). The schema only ever evolves
by adding fields or sections. Loading resolves every cross-reference and
rejects the whole document on the first dangling one; a loaded registry is an
immutable snapshot shared freely across readers (question usage counters are
the single documented exception, serialized by the service's event log).
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import yaml

from .domain import (
    Authority,
    ExamQuestion,
    LearningOutcome,
    Location,
    Procedure,
    SkillTrackError,
    StaffMember,
    Student,
    TeachingUnit,
    WorkflowItem,
)


class ParseError(SkillTrackError):
    kind = "parse-error"


class DanglingReference(SkillTrackError):
    kind = "dangling-reference"


class DuplicateId(SkillTrackError):
    kind = "duplicate-id"


@dataclass(frozen=True)
class SlotSpec:
    """Patient slot as declared in a document; consumed by the scheduler."""

    slot_id: str
    procedure_id: str
    date: _dt.date
    capacity: int


@dataclass
class Registry:
    outcomes: dict[str, LearningOutcome] = field(default_factory=dict)
    procedures: dict[str, Procedure] = field(default_factory=dict)
    items: dict[str, WorkflowItem] = field(default_factory=dict)
    staff: dict[str, StaffMember] = field(default_factory=dict)
    students: dict[str, Student] = field(default_factory=dict)
    locations: dict[str, Location] = field(default_factory=dict)
    questions: dict[str, ExamQuestion] = field(default_factory=dict)
    teaching: dict[str, TeachingUnit] = field(default_factory=dict)
    slots: tuple[SlotSpec, ...] = ()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Registry):
            return NotImplemented
        return (
            self.outcomes == other.outcomes
            and self.procedures == other.procedures
            and self.items == other.items
            and self.staff == other.staff
            and self.students == other.students
            and self.locations == other.locations
            and self.questions == other.questions
            and self.teaching == other.teaching
            and self.slots == other.slots
        )


def _require_list(doc: dict, key: str) -> list:
    value = doc.get(key, [])
    if value is None:
        return []
    if not isinstance(value, list):
        raise ParseError(f"section {key!r} must be a list")
    return value


def _require(entry: dict, key: str, section: str) -> Any:
    if not isinstance(entry, dict):
        raise ParseError(f"entries in {section!r} must be mappings")
    if key not in entry:
        raise ParseError(f"entry in {section!r} missing field {key!r}")
    return entry[key]


def _insert(target: dict, obj: Any, section: str) -> None:
    if obj.id in target:
        raise DuplicateId(f"duplicate id {obj.id!r} in section {section!r}")
    target[obj.id] = obj


def _parse_date(value: Any, what: str) -> _dt.date:
    if isinstance(value, _dt.datetime):
        return value.date()
    if isinstance(value, _dt.date):
        return value
    if isinstance(value, str):
        try:
            return _dt.date.fromisoformat(value)
        except ValueError as exc:
            raise ParseError(f"bad date for {what}: {value!r}") from exc
    raise ParseError(f"bad date for {what}: {value!r}")


def registry_load(source: str | Path) -> Registry:
    """Build a registry from a document (YAML text or a path to one).

    All cross-references are resolved; a single dangling reference rejects the
    document wholesale. An empty document yields an empty registry.
    """
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    else:
        text = source
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"document is not valid YAML: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ParseError("document root must be a mapping of sections")

    reg = Registry()
    try:
        for entry in _require_list(doc, "outcomes"):
            _insert(
                reg.outcomes,
                LearningOutcome(
                    id=_require(entry, "id", "outcomes"),
                    label=entry.get("label", ""),
                    authority=Authority(entry.get("authority", "internal")),
                ),
                "outcomes",
            )
        for entry in _require_list(doc, "items"):
            _insert(
                reg.items,
                WorkflowItem(
                    id=_require(entry, "id", "items"),
                    label=entry.get("label", ""),
                    outcome_ids=frozenset(entry.get("outcome_ids", [])),
                ),
                "items",
            )
        for entry in _require_list(doc, "procedures"):
            _insert(
                reg.procedures,
                Procedure(
                    id=_require(entry, "id", "procedures"),
                    label=entry.get("label", ""),
                    workflow=tuple(_require(entry, "workflow", "procedures")),
                ),
                "procedures",
            )
        for entry in _require_list(doc, "staff"):
            _insert(
                reg.staff,
                StaffMember(
                    id=_require(entry, "id", "staff"),
                    name=entry.get("name", ""),
                ),
                "staff",
            )
        for entry in _require_list(doc, "students"):
            _insert(
                reg.students,
                Student(
                    id=_require(entry, "id", "students"),
                    cohort=str(entry.get("cohort", "")),
                    enrollment_date=_parse_date(
                        entry.get("enrollment_date", "1970-01-01"), "student"
                    ),
                ),
                "students",
            )
        for entry in _require_list(doc, "locations"):
            _insert(
                reg.locations,
                Location(
                    id=_require(entry, "id", "locations"),
                    name=entry.get("name", ""),
                    available_procedures=frozenset(
                        _require(entry, "available_procedures", "locations")
                    ),
                ),
                "locations",
            )
        for entry in _require_list(doc, "questions"):
            _insert(
                reg.questions,
                ExamQuestion(
                    id=_require(entry, "id", "questions"),
                    text=entry.get("text", ""),
                    outcome_ids=frozenset(_require(entry, "outcome_ids", "questions")),
                    attempts=int(entry.get("attempts", 0)),
                    correct=int(entry.get("correct", 0)),
                ),
                "questions",
            )
        for entry in _require_list(doc, "teaching"):
            _insert(
                reg.teaching,
                TeachingUnit(
                    id=_require(entry, "id", "teaching"),
                    label=entry.get("label", ""),
                    outcome_ids=frozenset(entry.get("outcome_ids", [])),
                ),
                "teaching",
            )
        slots = []
        for entry in _require_list(doc, "slots"):
            capacity = int(entry.get("capacity", 1))
            if capacity < 1:
                raise ParseError("slot capacity must be >= 1")
            slots.append(
                SlotSpec(
                    slot_id=_require(entry, "slot_id", "slots"),
                    procedure_id=_require(entry, "procedure_id", "slots"),
                    date=_parse_date(entry.get("date", "1970-01-01"), "slot"),
                    capacity=capacity,
                )
            )
        reg.slots = tuple(slots)
    except SkillTrackError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed entry: {exc}") from exc

    _check_references(reg)
    return reg


def _check_references(reg: Registry) -> None:
    for proc in reg.procedures.values():
        for item_id in proc.workflow:
            if item_id not in reg.items:
                raise DanglingReference(
                    f"procedure {proc.id} references undefined item {item_id}"
                )
    for item in reg.items.values():
        for oid in item.outcome_ids:
            if oid not in reg.outcomes:
                raise DanglingReference(
                    f"item {item.id} references undefined outcome {oid}"
                )
    for unit in reg.teaching.values():
        for oid in unit.outcome_ids:
            if oid not in reg.outcomes:
                raise DanglingReference(
                    f"teaching unit {unit.id} references undefined outcome {oid}"
                )
    for q in reg.questions.values():
        for oid in q.outcome_ids:
            if oid not in reg.outcomes:
                raise DanglingReference(
                    f"question {q.id} references undefined outcome {oid}"
                )
    for loc in reg.locations.values():
        for pid in loc.available_procedures:
            if pid not in reg.procedures:
                raise DanglingReference(
                    f"location {loc.id} references undefined procedure {pid}"
                )
    for slot in reg.slots:
        if slot.procedure_id not in reg.procedures:
            raise DanglingReference(
                f"slot {slot.slot_id} references undefined procedure "
                f"{slot.procedure_id}"
            )


def load_slots(source: str | Path) -> tuple[SlotSpec, ...]:
    """Parse only the slots section of a document.

    Skips cross-reference checks so a slots-only file can accompany a registry
    loaded elsewhere; callers validate procedure ids against their registry.
    """
    text = source.read_text(encoding="utf-8") if isinstance(source, Path) else source
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ParseError(f"document is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("document root must be a mapping of sections")
    slots = []
    for entry in _require_list(doc, "slots"):
        capacity = int(entry.get("capacity", 1))
        if capacity < 1:
            raise ParseError("slot capacity must be >= 1")
        slots.append(
            SlotSpec(
                slot_id=_require(entry, "slot_id", "slots"),
                procedure_id=_require(entry, "procedure_id", "slots"),
                date=_parse_date(entry.get("date", "1970-01-01"), "slot"),
                capacity=capacity,
            )
        )
    return tuple(slots)


def serialize(reg: Registry) -> str:
    """Render a registry back to document text (inverse of registry_load)."""
    doc: dict[str, list] = {}
    if reg.outcomes:
        doc["outcomes"] = [
            {"id": o.id, "label": o.label, "authority": o.authority.value}
            for o in _sorted(reg.outcomes.values())
        ]
    if reg.items:
        doc["items"] = [
            {"id": i.id, "label": i.label, "outcome_ids": sorted(i.outcome_ids)}
            for i in _sorted(reg.items.values())
        ]
    if reg.procedures:
        doc["procedures"] = [
            {"id": p.id, "label": p.label, "workflow": list(p.workflow)}
            for p in _sorted(reg.procedures.values())
        ]
    if reg.staff:
        doc["staff"] = [
            {"id": s.id, "name": s.name} for s in _sorted(reg.staff.values())
        ]
    if reg.students:
        doc["students"] = [
            {
                "id": s.id,
                "cohort": s.cohort,
                "enrollment_date": s.enrollment_date.isoformat(),
            }
            for s in _sorted(reg.students.values())
        ]
    if reg.locations:
        doc["locations"] = [
            {
                "id": l.id,
                "name": l.name,
                "available_procedures": sorted(l.available_procedures),
            }
            for l in _sorted(reg.locations.values())
        ]
    if reg.questions:
        doc["questions"] = [
            {
                "id": q.id,
                "text": q.text,
                "outcome_ids": sorted(q.outcome_ids),
                "attempts": q.attempts,
                "correct": q.correct,
            }
            for q in _sorted(reg.questions.values())
        ]
    if reg.teaching:
        doc["teaching"] = [
            {"id": t.id, "label": t.label, "outcome_ids": sorted(t.outcome_ids)}
            for t in _sorted(reg.teaching.values())
        ]
    if reg.slots:
        doc["slots"] = [
            {
                "slot_id": s.slot_id,
                "procedure_id": s.procedure_id,
                "date": s.date.isoformat(),
                "capacity": s.capacity,
            }
            for s in reg.slots
        ]
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)


def _sorted(entities: Iterable) -> list:
    return sorted(entities, key=lambda e: e.id)
