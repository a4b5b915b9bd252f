"""Deterministic synthetic cohorts for desk-scale testing of the analytics.

The generator reproduces the operational shape of a real deployment: hundreds
of students observed daily across many sites, a per-student program of block
rotations through locations (each location has its own small staff pool, which
is what keeps the number of distinct observers per student realistic), one
procedure per session, and a latent logistic learning curve per (student,
skill) discretized onto the 1..6 scale:

    ability(t) = L / (1 + exp(-r * (t - m))) + noise,
    indicator  = clip(round(ability + strictness[staff]), 1, 6)

where t counts the student's sessions on that skill and m is fixed by the
configured initial ability. Staff strictness is drawn once per staff member
from a zero-mean normal. Randomness comes from numpy's seeded PCG64 stream in
a fixed draw order, so the same config yields byte-identical output anywhere.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

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
from .obslog import ObservationLog, SessionInfo
from .registry import Registry


class InvalidConfig(SkillTrackError):
    kind = "invalid-config"


class UnknownKind(SkillTrackError):
    kind = "unknown-kind"


@dataclass(frozen=True)
class CohortConfig:
    n_students: int = 300
    n_staff: int = 100
    n_locations: int = 20
    n_outcomes: int = 165
    n_procedures: int = 30
    n_questions: int = 200
    n_teaching_units: int = 40
    items_per_procedure: int = 20
    years: float = 5.0
    teaching_weeks_per_year: int = 40
    sessions_per_student_week: float = 1.4
    mean_observations_per_session: float = 18.0
    locations_per_program: int = 11
    procedures_per_location: int = 8
    staff_strictness_spread: float = 0.5
    initial_ability: float = 1.0
    ability_ceiling: float = 6.0
    learning_rate: float = 0.8
    noise_level: float = 0.7
    seed: int = 0
    program_start: _dt.date = _dt.date(2020, 9, 1)
    # Pin exact strictness for named staff (overrides the random draw), e.g.
    # (("st001", -1.0),). This is how recovery experiments plant a known rater.
    strictness_overrides: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        positive = {
            "n_students": self.n_students,
            "n_staff": self.n_staff,
            "n_locations": self.n_locations,
            "n_outcomes": self.n_outcomes,
            "n_procedures": self.n_procedures,
            "items_per_procedure": self.items_per_procedure,
            "teaching_weeks_per_year": self.teaching_weeks_per_year,
            "locations_per_program": self.locations_per_program,
            "procedures_per_location": self.procedures_per_location,
        }
        for name, value in positive.items():
            if value < 1:
                raise InvalidConfig(f"{name} must be >= 1, got {value}")
        if self.n_questions < 0 or self.n_teaching_units < 0:
            raise InvalidConfig("question/teaching counts must be >= 0")
        if self.years <= 0 or self.sessions_per_student_week <= 0:
            raise InvalidConfig("program length and session rate must be positive")
        if self.mean_observations_per_session <= 0:
            raise InvalidConfig("mean_observations_per_session must be positive")
        if self.locations_per_program > self.n_locations:
            raise InvalidConfig("locations_per_program exceeds n_locations")
        if self.procedures_per_location > self.n_procedures:
            raise InvalidConfig("procedures_per_location exceeds n_procedures")
        if self.staff_strictness_spread < 0 or self.noise_level < 0:
            raise InvalidConfig("spread and noise must be non-negative")
        if not (0 < self.initial_ability < self.ability_ceiling):
            raise InvalidConfig("need 0 < initial_ability < ability_ceiling")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be positive")

    @property
    def sessions_per_student(self) -> int:
        return max(
            1,
            round(
                self.years
                * self.teaching_weeks_per_year
                * self.sessions_per_student_week
            ),
        )

    @property
    def curve_midpoint(self) -> float:
        """Sessions until half the ability ceiling, implied by initial ability."""
        return (
            math.log(self.ability_ceiling / self.initial_ability - 1.0)
            / self.learning_rate
        )


def _ability(config: CohortConfig, t: np.ndarray) -> np.ndarray:
    return config.ability_ceiling / (
        1.0 + np.exp(-config.learning_rate * (t - config.curve_midpoint))
    )


def _cumcount(codes: np.ndarray) -> np.ndarray:
    """Occurrence index of each element within its value group, order kept."""
    order = np.argsort(codes, kind="stable")
    sorted_codes = codes[order]
    n = len(codes)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    new_group = np.r_[True, sorted_codes[1:] != sorted_codes[:-1]]
    starts = np.flatnonzero(new_group)
    lengths = np.diff(np.r_[starts, n])
    group_start = np.repeat(starts, lengths)
    ranks = np.arange(n) - group_start
    out = np.empty(n, dtype=np.int64)
    out[order] = ranks
    return out


def _build_registry(config: CohortConfig, rng: np.random.Generator) -> Registry:
    reg = Registry()
    outcome_ids = [f"o{k + 1:03d}" for k in range(config.n_outcomes)]
    for oid in outcome_ids:
        authority = (
            Authority.EXTERNAL if int(oid[1:]) % 3 == 0 else Authority.INTERNAL
        )
        reg.outcomes[oid] = LearningOutcome(
            id=oid, label=f"Learning outcome {oid[1:]}", authority=authority
        )

    ipp = config.items_per_procedure
    for p in range(config.n_procedures):
        pid = f"p{p + 1:02d}"
        item_ids = [f"w{p + 1:02d}_{k + 1:02d}" for k in range(ipp)]
        for iid in item_ids:
            n_mapped = int(rng.integers(1, 4))
            mapped = rng.choice(config.n_outcomes, size=n_mapped, replace=False)
            reg.items[iid] = WorkflowItem(
                id=iid,
                label=f"Step {iid}",
                outcome_ids=frozenset(outcome_ids[m] for m in mapped),
            )
        reg.procedures[pid] = Procedure(
            id=pid, label=f"Procedure {p + 1:02d}", workflow=tuple(item_ids)
        )

    for s in range(config.n_staff):
        sid = f"st{s + 1:03d}"
        reg.staff[sid] = StaffMember(id=sid, name=f"Staff member {s + 1:03d}")
    for s in range(config.n_students):
        sid = f"stu{s + 1:04d}"
        reg.students[sid] = Student(
            id=sid,
            cohort=f"cohort-{config.program_start.year}",
            enrollment_date=config.program_start,
        )

    # Each location offers a procedure menu; round-robin seeding guarantees
    # every procedure is offered somewhere.
    offered: list[set[int]] = [set() for _ in range(config.n_locations)]
    for p in range(config.n_procedures):
        offered[p % config.n_locations].add(p)
    for j in range(config.n_locations):
        while len(offered[j]) < config.procedures_per_location:
            offered[j].add(int(rng.integers(0, config.n_procedures)))
    for j in range(config.n_locations):
        lid = f"loc{j + 1:02d}"
        reg.locations[lid] = Location(
            id=lid,
            name=f"Clinic {j + 1:02d}",
            available_procedures=frozenset(f"p{p + 1:02d}" for p in offered[j]),
        )

    for q in range(config.n_questions):
        qid = f"q{q + 1:03d}"
        n_mapped = int(rng.integers(1, 4))
        mapped = rng.choice(config.n_outcomes, size=n_mapped, replace=False)
        reg.questions[qid] = ExamQuestion(
            id=qid,
            text=f"Question {q + 1:03d}",
            outcome_ids=frozenset(outcome_ids[m] for m in mapped),
        )
    for t in range(config.n_teaching_units):
        tid = f"tu{t + 1:03d}"
        n_mapped = int(rng.integers(1, 5))
        mapped = rng.choice(config.n_outcomes, size=n_mapped, replace=False)
        reg.teaching[tid] = TeachingUnit(
            id=tid,
            label=f"Teaching unit {t + 1:03d}",
            outcome_ids=frozenset(outcome_ids[m] for m in mapped),
        )
    return reg


def generate(config: CohortConfig = CohortConfig()) -> tuple[Registry, ObservationLog]:
    """Produce (registry, observation log) for the configured cohort.

    Deterministic: a fixed seed yields byte-identical logs. Observations pass
    domain validation by construction (items drawn from the session
    procedure's own workflow, sessions opened at the recorded location).
    """
    rng = np.random.default_rng(config.seed)
    reg = _build_registry(config, rng)

    n_sessions = config.sessions_per_student
    total_days = max(int(config.years * 365), 1)
    start_epoch = int(
        _dt.datetime(
            config.program_start.year,
            config.program_start.month,
            config.program_start.day,
            tzinfo=_dt.timezone.utc,
        ).timestamp()
    )

    strictness = rng.normal(0.0, config.staff_strictness_spread, config.n_staff)
    for staff_id, value in config.strictness_overrides:
        if staff_id not in reg.staff:
            raise InvalidConfig(f"strictness override for unknown staff {staff_id}")
        strictness[int(staff_id[2:]) - 1] = float(value)

    # Location->staff pools steer which observers a student can meet; they are
    # a generator construct, not registry state.
    pool_order = rng.permutation(config.n_staff)
    pools = [np.sort(p) for p in np.array_split(pool_order, config.n_locations)]
    offered = [
        np.sort(
            np.asarray(
                [int(p[1:]) - 1 for p in reg.locations[f"loc{j + 1:02d}"].available_procedures],
                dtype=np.int64,
            )
        )
        for j in range(config.n_locations)
    ]

    ipp = config.items_per_procedure
    sessions: list[SessionInfo] = []
    col_student: list[np.ndarray] = []
    col_staff: list[np.ndarray] = []
    col_session: list[np.ndarray] = []
    col_item: list[np.ndarray] = []
    col_procedure: list[np.ndarray] = []
    col_indicator: list[np.ndarray] = []
    col_ts: list[np.ndarray] = []

    session_day = (np.arange(n_sessions) * total_days) // n_sessions
    block_of_session = (
        np.arange(n_sessions) * config.locations_per_program
    ) // n_sessions

    for s in range(config.n_students):
        visited = rng.permutation(config.n_locations)[: config.locations_per_program]
        loc_codes = visited[block_of_session]

        proc_codes = np.empty(n_sessions, dtype=np.int64)
        staff_codes = np.empty(n_sessions, dtype=np.int64)
        for b in range(config.locations_per_program):
            rows = np.flatnonzero(block_of_session == b)
            loc = int(visited[b])
            menu = offered[loc]
            pool = pools[loc]
            proc_codes[rows] = menu[rng.integers(0, len(menu), len(rows))]
            staff_codes[rows] = pool[rng.integers(0, len(pool), len(rows))]

        t = _cumcount(proc_codes).astype(np.float64)
        ability = _ability(config, t)
        obs_counts = rng.poisson(config.mean_observations_per_session, n_sessions)

        opened = (
            start_epoch
            + session_day * 86400
            + 9 * 3600
            + (np.arange(n_sessions) % 4) * 5400
        )
        total_obs = int(obs_counts.sum())
        proc_rep = np.repeat(proc_codes, obs_counts)
        item_codes = proc_rep * ipp + rng.integers(0, ipp, total_obs)
        latent = np.repeat(ability, obs_counts) + strictness[
            np.repeat(staff_codes, obs_counts)
        ]
        if config.noise_level > 0:
            latent = latent + rng.normal(0.0, config.noise_level, total_obs)
        indicators = np.clip(np.rint(latent), 1, 6).astype(np.int8)

        within = _obs_offsets(obs_counts)
        ts = np.repeat(opened, obs_counts) + within * 120

        session_base = len(sessions)
        student_id = f"stu{s + 1:04d}"
        for j in range(n_sessions):
            closed = int(opened[j]) + int(max(obs_counts[j], 1)) * 120 + 600
            sessions.append(
                SessionInfo(
                    id=f"s{s + 1:04d}_{j + 1:04d}",
                    location_id=f"loc{int(loc_codes[j]) + 1:02d}",
                    staff_id=f"st{int(staff_codes[j]) + 1:03d}",
                    student_ids=(student_id,),
                    opened_at=int(opened[j]),
                    closed_at=closed,
                )
            )
        col_student.append(np.full(total_obs, s, dtype=np.int32))
        col_staff.append(np.repeat(staff_codes, obs_counts).astype(np.int32))
        col_session.append(
            (np.repeat(np.arange(n_sessions), obs_counts) + session_base).astype(
                np.int32
            )
        )
        col_item.append(item_codes.astype(np.int32))
        col_procedure.append(proc_rep.astype(np.int32))
        col_indicator.append(indicators)
        col_ts.append(ts.astype(np.int64))

    log = ObservationLog(
        students=[f"stu{s + 1:04d}" for s in range(config.n_students)],
        staff=[f"st{s + 1:03d}" for s in range(config.n_staff)],
        items=[
            f"w{p + 1:02d}_{k + 1:02d}"
            for p in range(config.n_procedures)
            for k in range(ipp)
        ],
        procedures=[f"p{p + 1:02d}" for p in range(config.n_procedures)],
        sessions=sessions,
        student=np.concatenate(col_student),
        staff_member=np.concatenate(col_staff),
        session=np.concatenate(col_session),
        item=np.concatenate(col_item),
        procedure=np.concatenate(col_procedure),
        indicator=np.concatenate(col_indicator),
        ts=np.concatenate(col_ts),
    )
    return reg, log


def _obs_offsets(counts: np.ndarray) -> np.ndarray:
    """0..count-1 within each session, concatenated."""
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    ends = np.cumsum(counts)
    starts = ends - counts
    return np.arange(total) - np.repeat(starts, counts)


# -- anomaly injection -----------------------------------------------------------

@dataclass(frozen=True)
class AnomalyLabel:
    kind: str
    entity_id: str
    detail: Mapping


def inject_anomaly(
    log: ObservationLog,
    kind: str,
    params: Mapping | None = None,
    seed: int = 0,
) -> tuple[ObservationLog, tuple[AnomalyLabel, ...]]:
    """Rewrite parts of a generated log to plant a known pathology.

    Kinds:
      narrow-rater          params: staff_ids, support (default [3, 4]) --
                            compresses each rater's scores onto the support
                            values, preserving rank order.
      inconsistent-student  params: student_ids, below_rate (0.5), threshold
                            (4), low (2) -- whole sessions flip between
                            clearly-below and at-or-above threshold.
      non-improver          params: student_ids, cap (3) -- the student's
                            indicators never exceed the cap.

    Empty or missing target lists leave the log unchanged with no labels.
    Returns the rewritten log plus ground-truth labels for recovery tests.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    if kind == "narrow-rater":
        return _narrow_rater(log, params)
    if kind == "inconsistent-student":
        return _inconsistent_student(log, params, rng)
    if kind == "non-improver":
        return _non_improver(log, params)
    raise UnknownKind(f"unknown anomaly kind {kind!r}")


def _narrow_rater(log, params) -> tuple[ObservationLog, tuple[AnomalyLabel, ...]]:
    staff_ids: Sequence[str] = params.get("staff_ids", [])
    support = sorted(set(params.get("support", (3, 4))))
    if not staff_ids:
        return log, ()
    if not support or support[0] < 1 or support[-1] > 6:
        raise InvalidConfig("support must be distinct indicators within 1..6")
    indicators = log.indicator.copy()
    labels = []
    for staff_id in staff_ids:
        code = log.code_of("staff", staff_id)
        if code is None:
            raise InvalidConfig(f"staff {staff_id} has no observations in log")
        rows = np.flatnonzero(log.staff_member == code)
        if len(rows) < len(support):
            raise InvalidConfig(
                f"staff {staff_id}: fewer observations than support points"
            )
        order = rows[np.lexsort((rows, log.ts[rows], log.indicator[rows]))]
        groups = np.array_split(order, len(support))
        for value, group in zip(support, groups):
            indicators[group] = value
        labels.append(
            AnomalyLabel(
                kind="narrow-rater",
                entity_id=staff_id,
                detail={"support": tuple(support)},
            )
        )
    return log.with_indicators(indicators), tuple(labels)


def _inconsistent_student(
    log, params, rng
) -> tuple[ObservationLog, tuple[AnomalyLabel, ...]]:
    student_ids: Sequence[str] = params.get("student_ids", [])
    below_rate = float(params.get("below_rate", 0.5))
    threshold = int(params.get("threshold", 4))
    low = int(params.get("low", 2))
    if not student_ids:
        return log, ()
    if not (0.0 <= below_rate <= 1.0):
        raise InvalidConfig("below_rate must be in [0, 1]")
    indicators = log.indicator.copy()
    labels = []
    for student_id in student_ids:
        code = log.code_of("student", student_id)
        if code is None:
            raise InvalidConfig(f"student {student_id} has no observations in log")
        rows = np.flatnonzero(log.student == code)
        session_codes = np.unique(log.session[rows])
        flips = rng.random(len(session_codes)) < below_rate
        below_sessions = set(session_codes[flips].tolist())
        for r in rows:
            if int(log.session[r]) in below_sessions:
                indicators[r] = low
            else:
                indicators[r] = max(int(indicators[r]), threshold)
        labels.append(
            AnomalyLabel(
                kind="inconsistent-student",
                entity_id=student_id,
                detail={
                    "below_rate": below_rate,
                    "threshold": threshold,
                    "below_sessions": tuple(
                        log.sessions[int(c)].id for c in sorted(below_sessions)
                    ),
                },
            )
        )
    return log.with_indicators(indicators), tuple(labels)


def _non_improver(log, params) -> tuple[ObservationLog, tuple[AnomalyLabel, ...]]:
    student_ids: Sequence[str] = params.get("student_ids", [])
    cap = int(params.get("cap", 3))
    if not student_ids:
        return log, ()
    if not (1 <= cap <= 6):
        raise InvalidConfig("cap must be within 1..6")
    indicators = log.indicator.copy()
    labels = []
    for student_id in student_ids:
        code = log.code_of("student", student_id)
        if code is None:
            raise InvalidConfig(f"student {student_id} has no observations in log")
        rows = np.flatnonzero(log.student == code)
        indicators[rows] = np.minimum(indicators[rows], cap)
        labels.append(
            AnomalyLabel(
                kind="non-improver", entity_id=student_id, detail={"cap": cap}
            )
        )
    return log.with_indicators(indicators), tuple(labels)
