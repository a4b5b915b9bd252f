"""Allocation of students to scarce patient slots, with holding patterns.

Students already performing consistently on a procedure (per the holding
thresholds) sit out that procedure's allocation round; everyone else competes
for slots in descending priority, where priority combines a consistency gap
and an experience gap. Unused capacity is offered back to holding students in
a second pass, so reduced assessment frequency shifts toward procedures with
spare supply. The planner is a pure, deterministic function of its inputs.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .domain import SkillTrackError
from .registry import SlotSpec


class InvalidPlanConfig(SkillTrackError):
    kind = "invalid-plan-config"


@dataclass(frozen=True)
class PatientSlot:
    slot_id: str
    procedure_id: str
    date: _dt.date
    capacity: int = 1

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise InvalidPlanConfig(f"slot {self.slot_id}: capacity must be >= 1")

    @classmethod
    def from_spec(cls, spec: SlotSpec) -> "PatientSlot":
        return cls(
            slot_id=spec.slot_id,
            procedure_id=spec.procedure_id,
            date=spec.date,
            capacity=spec.capacity,
        )


@dataclass(frozen=True)
class SkillSnapshot:
    """What the planner needs to know about one (student, procedure)."""

    consistency: float | None  # None = no applicable sessions yet
    experience: int = 0


# Keyed by (student_id, procedure_id); missing pairs read as no data at all.
AnalyticsSnapshot = Mapping[tuple[str, str], SkillSnapshot]


@dataclass(frozen=True)
class PlanConfig:
    # Invented defaults, no external provenance; tune per program.
    hold_consistency: float = 0.9
    hold_min_experience: int = 5
    weight_consistency: float = 1.0
    weight_experience: float = 1.0
    min_experience: int = 5

    def __post_init__(self) -> None:
        if not (0.0 <= self.hold_consistency <= 1.0):
            raise InvalidPlanConfig("hold_consistency must be in [0, 1]")
        if self.hold_min_experience < 0 or self.min_experience < 1:
            raise InvalidPlanConfig("experience thresholds out of range")
        if self.weight_consistency < 0 or self.weight_experience < 0:
            raise InvalidPlanConfig("weights must be non-negative")


def priority_score(
    snapshot: SkillSnapshot, config: PlanConfig = PlanConfig()
) -> float:
    """How much a student would benefit from practicing a procedure.

    score = w_c * (1 - consistency) + w_e * experience_gap / min_experience,
    with undefined consistency counted as maximal need (1 - c term = 1).
    """
    c = snapshot.consistency
    consistency_need = 1.0 if c is None else max(0.0, 1.0 - c)
    gap = max(0, config.min_experience - snapshot.experience)
    experience_need = gap / config.min_experience
    return (
        config.weight_consistency * consistency_need
        + config.weight_experience * experience_need
    )


@dataclass(frozen=True)
class Assignment:
    student_id: str
    slot_id: str
    procedure_id: str


@dataclass(frozen=True)
class HoldingEntry:
    student_id: str
    procedure_id: str
    reason: str


@dataclass(frozen=True)
class AllocationPlan:
    assignments: tuple[Assignment, ...]
    holding: tuple[HoldingEntry, ...]
    unassigned: tuple[tuple[str, str], ...]  # unmet (student, procedure) demand

    def to_table(self) -> str:
        lines = ["student_id\tprocedure_id\tstatus\tslot_id"]
        for a in self.assignments:
            lines.append(f"{a.student_id}\t{a.procedure_id}\tassigned\t{a.slot_id}")
        for h in self.holding:
            lines.append(f"{h.student_id}\t{h.procedure_id}\tholding\t")
        for student_id, procedure_id in self.unassigned:
            lines.append(f"{student_id}\t{procedure_id}\tunassigned\t")
        return "\n".join(lines) + "\n"


def _is_holding(snap: SkillSnapshot, config: PlanConfig) -> bool:
    return (
        snap.consistency is not None
        and snap.consistency >= config.hold_consistency
        and snap.experience >= config.hold_min_experience
    )


@dataclass
class _Round:
    config: PlanConfig
    assignments: list[Assignment] = field(default_factory=list)
    per_student: dict[str, int] = field(default_factory=dict)

    def pick_order(self, demand: dict[tuple[str, str], float]):
        # Re-rank each step: the fewest-assignments tie-break is dynamic.
        return min(
            demand,
            key=lambda key: (
                -demand[key],
                self.per_student.get(key[0], 0),
                key[0],
                key[1],
            ),
        )

    def assign(self, student_id: str, slot: PatientSlot) -> None:
        self.assignments.append(
            Assignment(
                student_id=student_id,
                slot_id=slot.slot_id,
                procedure_id=slot.procedure_id,
            )
        )
        self.per_student[student_id] = self.per_student.get(student_id, 0) + 1


def plan(
    students: Sequence[str],
    slots: Sequence[PatientSlot],
    snapshot: AnalyticsSnapshot,
    config: PlanConfig = PlanConfig(),
) -> AllocationPlan:
    """One allocation round.

    The round's procedures are those with slots plus those the analytics
    snapshot tracks for the given students, so unmet demand is visible even
    when a procedure has no supply at all. Holding-eligible pairs leave the
    round first; the rest are matched greedily in descending priority, ties
    broken by fewest assignments so far this round, then student id. A second
    pass offers leftover capacity to holding students. Infeasibility is never
    an error: unmet demand is reported in the plan.
    """
    capacity: dict[str, int] = {}
    slots_by_proc: dict[str, list[PatientSlot]] = {}
    for slot in sorted(slots, key=lambda s: (s.date, s.slot_id)):
        if slot.slot_id in capacity:
            raise InvalidPlanConfig(f"duplicate slot id {slot.slot_id}")
        capacity[slot.slot_id] = slot.capacity
        slots_by_proc.setdefault(slot.procedure_id, []).append(slot)

    def free_slot(procedure_id: str) -> PatientSlot | None:
        for slot in slots_by_proc.get(procedure_id, []):
            if capacity[slot.slot_id] > 0:
                return slot
        return None

    student_pool = sorted(set(students))
    procedures = set(slots_by_proc)
    procedures.update(
        procedure_id
        for student_id, procedure_id in snapshot
        if student_id in set(student_pool)
    )

    holding: list[HoldingEntry] = []
    demand: dict[tuple[str, str], float] = {}
    for procedure_id in sorted(procedures):
        for student_id in student_pool:
            snap = snapshot.get((student_id, procedure_id), SkillSnapshot(None, 0))
            if _is_holding(snap, config):
                holding.append(
                    HoldingEntry(
                        student_id=student_id,
                        procedure_id=procedure_id,
                        reason="meets-consistency-target",
                    )
                )
            else:
                demand[(student_id, procedure_id)] = priority_score(snap, config)

    rnd = _Round(config=config)
    unassigned: list[tuple[str, str]] = []
    while demand:
        student_id, procedure_id = rnd.pick_order(demand)
        del demand[(student_id, procedure_id)]
        slot = free_slot(procedure_id)
        if slot is None:
            unassigned.append((student_id, procedure_id))
            continue
        capacity[slot.slot_id] -= 1
        rnd.assign(student_id, slot)

    # Surplus pass: spare capacity goes to holding students of that procedure.
    surplus_scores = {
        (h.student_id, h.procedure_id): priority_score(
            snapshot.get((h.student_id, h.procedure_id), SkillSnapshot(None, 0)),
            config,
        )
        for h in holding
        if free_slot(h.procedure_id) is not None
    }
    still_holding = list(holding)
    while surplus_scores:
        student_id, procedure_id = rnd.pick_order(surplus_scores)
        del surplus_scores[(student_id, procedure_id)]
        slot = free_slot(procedure_id)
        if slot is None:
            continue
        capacity[slot.slot_id] -= 1
        rnd.assign(student_id, slot)
        still_holding = [
            h
            for h in still_holding
            if not (h.student_id == student_id and h.procedure_id == procedure_id)
        ]

    return AllocationPlan(
        assignments=tuple(rnd.assignments),
        holding=tuple(still_holding),
        unassigned=tuple(sorted(unassigned)),
    )
