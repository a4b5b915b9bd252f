"""Mapping graph from data elements to learning outcomes.

Workflow items, exam questions and teaching units each map to one or many
outcomes. On top of the edge set sit coverage queries (how much evidence
exists per outcome), blueprint verification against accreditation-style
constraints, semi-automatic exam generation, and per-question performance
tracking. Exam generation is deterministic greedy set-multicover: each pick
maximizes newly satisfied constraint demand, ties broken by lowest historical
usage then lexicographic question id.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .domain import ExamQuestion, SkillTrackError, UnknownReference
from .obslog import ObservationLog
from .registry import DanglingReference, Registry


class SourceKind(str, enum.Enum):
    WORKFLOW_ITEM = "workflow-item"
    EXAM_QUESTION = "exam-question"
    TEACHING_UNIT = "teaching-unit"


@dataclass(frozen=True)
class MappingEdge:
    source_kind: SourceKind
    source_id: str
    outcome_id: str


def edges_from_registry(reg: Registry) -> frozenset[MappingEdge]:
    """Derive the full edge set from outcome ids carried on registry entities."""
    edges = set()
    for item in reg.items.values():
        for oid in item.outcome_ids:
            edges.add(MappingEdge(SourceKind.WORKFLOW_ITEM, item.id, oid))
    for q in reg.questions.values():
        for oid in q.outcome_ids:
            edges.add(MappingEdge(SourceKind.EXAM_QUESTION, q.id, oid))
    for unit in reg.teaching.values():
        for oid in unit.outcome_ids:
            edges.add(MappingEdge(SourceKind.TEACHING_UNIT, unit.id, oid))
    return frozenset(edges)


# -- coverage ----------------------------------------------------------------

@dataclass(frozen=True)
class CoverageRow:
    outcome_id: str
    wba_items: int
    teaching_units: int
    questions: int
    observations: int
    question_attempts: int


@dataclass(frozen=True)
class CoverageFilter:
    """Restrict a coverage query by source kind and/or observation date range.

    The date range (epoch seconds, inclusive) filters data points only; which
    sources are mapped is structural and has no date.
    """

    source_kinds: frozenset[SourceKind] | None = None
    ts_from: int | None = None
    ts_to: int | None = None

    def allows(self, kind: SourceKind) -> bool:
        return self.source_kinds is None or kind in self.source_kinds


@dataclass(frozen=True)
class CoverageReport:
    rows: tuple[CoverageRow, ...]

    def to_table(self) -> str:
        """Tab-separated export, one row per outcome, fixed column order."""
        lines = ["outcome_id\twba_items\tteaching_units\tquestions\tobservations"]
        for r in self.rows:
            lines.append(
                f"{r.outcome_id}\t{r.wba_items}\t{r.teaching_units}"
                f"\t{r.questions}\t{r.observations}"
            )
        return "\n".join(lines) + "\n"


def coverage_report(
    reg: Registry,
    edges: Iterable[MappingEdge],
    log: ObservationLog | None = None,
    filter: CoverageFilter | None = None,
) -> CoverageReport:
    """Evidence per learning outcome.

    Every outcome in the registry gets exactly one row, zero counts included.
    Mapped-source counts are distinct sources with an edge to the outcome;
    observation counts join the observation log through item edges (an item
    mapped to two outcomes contributes its observations to both); question
    attempts come from the bank's usage counters through question edges.
    """
    filter = filter or CoverageFilter()
    by_outcome: dict[str, dict[SourceKind, set[str]]] = {
        oid: {k: set() for k in SourceKind} for oid in reg.outcomes
    }
    for edge in edges:
        if edge.outcome_id not in reg.outcomes:
            raise DanglingReference(
                f"edge targets undefined outcome {edge.outcome_id}"
            )
        known = {
            SourceKind.WORKFLOW_ITEM: reg.items,
            SourceKind.EXAM_QUESTION: reg.questions,
            SourceKind.TEACHING_UNIT: reg.teaching,
        }[edge.source_kind]
        if edge.source_id not in known:
            raise DanglingReference(
                f"edge from undefined {edge.source_kind.value} {edge.source_id}"
            )
        if filter.allows(edge.source_kind):
            by_outcome[edge.outcome_id][edge.source_kind].add(edge.source_id)

    obs_counts = {oid: 0 for oid in reg.outcomes}
    if log is not None and len(log) and filter.allows(SourceKind.WORKFLOW_ITEM):
        import numpy as np

        mask = np.ones(len(log), dtype=bool)
        if filter.ts_from is not None:
            mask &= log.ts >= filter.ts_from
        if filter.ts_to is not None:
            mask &= log.ts <= filter.ts_to
        item_counts = np.bincount(log.item[mask], minlength=len(log.items))
        per_item = {log.items[i]: int(c) for i, c in enumerate(item_counts) if c}
        for oid, sources in by_outcome.items():
            obs_counts[oid] = sum(
                per_item.get(item_id, 0)
                for item_id in sources[SourceKind.WORKFLOW_ITEM]
            )

    attempts = {oid: 0 for oid in reg.outcomes}
    if filter.allows(SourceKind.EXAM_QUESTION):
        for oid, sources in by_outcome.items():
            attempts[oid] = sum(
                reg.questions[qid].attempts
                for qid in sources[SourceKind.EXAM_QUESTION]
            )

    rows = tuple(
        CoverageRow(
            outcome_id=oid,
            wba_items=len(by_outcome[oid][SourceKind.WORKFLOW_ITEM]),
            teaching_units=len(by_outcome[oid][SourceKind.TEACHING_UNIT]),
            questions=len(by_outcome[oid][SourceKind.EXAM_QUESTION]),
            observations=obs_counts[oid],
            question_attempts=attempts[oid],
        )
        for oid in sorted(reg.outcomes)
    )
    return CoverageReport(rows=rows)


# -- blueprint verification ----------------------------------------------------

@dataclass(frozen=True)
class BlueprintConstraint:
    outcome_id: str
    min_questions: int
    max_questions: int | None = None

    def __post_init__(self) -> None:
        if self.min_questions < 0:
            raise ValueError("min_questions must be non-negative")
        if self.max_questions is not None and self.max_questions < self.min_questions:
            raise ValueError("max_questions must be >= min_questions")


@dataclass(frozen=True)
class ConstraintCheck:
    constraint: BlueprintConstraint
    actual: int
    satisfied: bool


@dataclass(frozen=True)
class BlueprintReport:
    checks: tuple[ConstraintCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.satisfied for c in self.checks)


class InfeasibleBlueprint(SkillTrackError):
    kind = "infeasible-blueprint"

    def __init__(self, message: str, constraint: BlueprintConstraint) -> None:
        super().__init__(message)
        self.constraint = constraint


def _question_outcomes(
    edges: Iterable[MappingEdge],
) -> dict[str, frozenset[str]]:
    acc: dict[str, set[str]] = {}
    for e in edges:
        if e.source_kind is SourceKind.EXAM_QUESTION:
            acc.setdefault(e.source_id, set()).add(e.outcome_id)
    return {qid: frozenset(o) for qid, o in acc.items()}


def verify_blueprint(
    exam: Sequence[str],
    constraints: Sequence[BlueprintConstraint],
    edges: Iterable[MappingEdge],
) -> BlueprintReport:
    """Check an exam's per-outcome coverage against every constraint.

    An empty constraint list passes vacuously. Unknown question ids in the
    exam raise UnknownReference.
    """
    outcomes_by_q = _question_outcomes(edges)
    for qid in exam:
        if qid not in outcomes_by_q:
            raise UnknownReference(f"exam references unmapped question {qid}")
    cover: dict[str, int] = {}
    for qid in exam:
        for oid in outcomes_by_q[qid]:
            cover[oid] = cover.get(oid, 0) + 1
    checks = []
    for c in constraints:
        actual = cover.get(c.outcome_id, 0)
        ok = actual >= c.min_questions and (
            c.max_questions is None or actual <= c.max_questions
        )
        checks.append(ConstraintCheck(constraint=c, actual=actual, satisfied=ok))
    return BlueprintReport(checks=tuple(checks))


def generate_exam(
    bank: Iterable[ExamQuestion],
    constraints: Sequence[BlueprintConstraint],
    size_limit: int,
    history: Mapping[str, int] | None = None,
) -> list[str]:
    """Greedy exam construction meeting all blueprint constraints.

    Each step picks the question reducing total unmet constraint demand the
    most; ties go to the least-used question (per ``history``), then to the
    lexicographically smallest id. Questions that would push an outcome over a
    max constraint are never picked. Raises InfeasibleBlueprint naming the
    first (in input order) constraint that cannot be met.
    """
    if size_limit < 1:
        raise ValueError("size_limit must be >= 1")
    history = history or {}
    questions = {q.id: q for q in bank}
    demand = {i: c.min_questions for i, c in enumerate(constraints)}
    maxima = {
        c.outcome_id: c.max_questions
        for c in constraints
        if c.max_questions is not None
    }
    cover: dict[str, int] = {}
    chosen: list[str] = []
    remaining = dict(questions)

    def violates_max(q: ExamQuestion) -> bool:
        return any(
            cover.get(oid, 0) + 1 > maxima[oid]
            for oid in q.outcome_ids
            if oid in maxima
        )

    def gain(q: ExamQuestion) -> int:
        return sum(
            1
            for i, c in enumerate(constraints)
            if demand[i] > 0 and c.outcome_id in q.outcome_ids
        )

    while any(d > 0 for d in demand.values()):
        if len(chosen) >= size_limit:
            raise InfeasibleBlueprint(
                "size limit reached with unmet demand",
                _first_unmet(constraints, demand),
            )
        best = None
        best_key = None
        for qid in sorted(remaining):
            q = remaining[qid]
            g = gain(q)
            if g <= 0 or violates_max(q):
                continue
            key = (-g, history.get(qid, 0), qid)
            if best_key is None or key < best_key:
                best, best_key = q, key
        if best is None:
            raise InfeasibleBlueprint(
                "no eligible question covers the remaining demand",
                _first_unmet(constraints, demand),
            )
        chosen.append(best.id)
        del remaining[best.id]
        for oid in best.outcome_ids:
            cover[oid] = cover.get(oid, 0) + 1
        for i, c in enumerate(constraints):
            if demand[i] > 0 and c.outcome_id in best.outcome_ids:
                demand[i] -= 1
    return chosen


def _first_unmet(
    constraints: Sequence[BlueprintConstraint], demand: Mapping[int, int]
) -> BlueprintConstraint:
    for i, c in enumerate(constraints):
        if demand[i] > 0:
            return c
    raise AssertionError("no unmet constraint")  # pragma: no cover


# -- question performance ------------------------------------------------------

class UnknownQuestion(SkillTrackError):
    kind = "unknown-question"


@dataclass(frozen=True)
class QuestionPerformance:
    question_id: str
    attempts: int
    difficulty: float | None  # proportion correct; None when no data


def record_question_result(
    questions: Mapping[str, ExamQuestion], question_id: str, correct: bool
) -> ExamQuestion:
    """Accumulate one delivery result onto a question's usage counters."""
    q = questions.get(question_id)
    if q is None:
        raise UnknownQuestion(f"unknown question {question_id}")
    q.attempts += 1
    if correct:
        q.correct += 1
    return q


def question_performance(
    questions: Mapping[str, ExamQuestion], question_id: str
) -> QuestionPerformance:
    q = questions.get(question_id)
    if q is None:
        raise UnknownQuestion(f"unknown question {question_id}")
    difficulty = q.correct / q.attempts if q.attempts else None
    return QuestionPerformance(
        question_id=question_id, attempts=q.attempts, difficulty=difficulty
    )
