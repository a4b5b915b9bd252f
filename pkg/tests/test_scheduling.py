from __future__ import annotations

import datetime as dt
import itertools

import numpy as np
import pytest

from skilltrack.scheduling import (
    InvalidPlanConfig,
    PatientSlot,
    PlanConfig,
    SkillSnapshot,
    plan,
    priority_score,
)

MAY = dt.date(2025, 5, 1)


def slot(sid, proc="p1", capacity=1, day=0):
    return PatientSlot(
        slot_id=sid, procedure_id=proc,
        date=MAY + dt.timedelta(days=day), capacity=capacity,
    )


class TestPriorityScore:
    def test_maximal_need_scores_two(self):
        assert priority_score(SkillSnapshot(None, 0)) == pytest.approx(2.0)

    def test_no_need_scores_zero(self):
        assert priority_score(SkillSnapshot(1.0, 5)) == pytest.approx(0.0)

    def test_mixed_need(self):
        # consistency 0.5 and missing 1 of 5 sessions: 0.5 + 0.2
        assert priority_score(SkillSnapshot(0.5, 4)) == pytest.approx(0.7)

    def test_weights_scale_terms(self):
        config = PlanConfig(weight_consistency=2.0, weight_experience=0.0)
        assert priority_score(SkillSnapshot(0.5, 0), config) == pytest.approx(1.0)

    def test_config_validation(self):
        with pytest.raises(InvalidPlanConfig):
            PlanConfig(hold_consistency=1.5)
        with pytest.raises(InvalidPlanConfig):
            PlanConfig(weight_consistency=-1)


class TestPlan:
    def test_higher_priority_student_wins_single_slot(self):
        snapshot = {
            ("amy", "p1"): SkillSnapshot(0.3, 5),   # score 0.7
            ("bob", "p1"): SkillSnapshot(0.8, 5),   # score 0.2
        }
        result = plan(["amy", "bob"], [slot("sl1")], snapshot)
        assert result.assignments[0].student_id == "amy"
        assert result.unassigned == (("bob", "p1"),)
        # Exhaustive check on this instance: assigning bob instead yields less.
        assert priority_score(snapshot[("amy", "p1")]) > priority_score(
            snapshot[("bob", "p1")]
        )

    def test_consistent_experienced_student_goes_to_holding(self):
        snapshot = {("amy", "p1"): SkillSnapshot(0.95, 10)}
        result = plan(["amy"], [slot("sl1"), slot("sl2")], snapshot)
        holding_pairs = {(h.student_id, h.procedure_id) for h in result.holding}
        # Surplus capacity exists, so the holding student is offered a slot.
        assigned_pairs = {
            (a.student_id, a.procedure_id) for a in result.assignments
        }
        assert ("amy", "p1") in holding_pairs | assigned_pairs

    def test_holding_without_surplus_stays_holding(self):
        snapshot = {
            ("amy", "p1"): SkillSnapshot(0.95, 10),
            ("bob", "p1"): SkillSnapshot(0.2, 1),
        }
        result = plan(["amy", "bob"], [slot("sl1")], snapshot)
        assert result.assignments[0].student_id == "bob"
        assert result.holding[0].student_id == "amy"
        assert result.holding[0].reason == "meets-consistency-target"

    def test_zero_slots_leaves_all_demand_unassigned(self):
        snapshot = {
            ("amy", "p1"): SkillSnapshot(0.1, 0),
            ("amy", "p2"): SkillSnapshot(0.95, 10),  # holding-eligible
        }
        result = plan(["amy"], [], snapshot)
        assert result.assignments == ()
        assert result.unassigned == (("amy", "p1"),)
        assert [(h.student_id, h.procedure_id) for h in result.holding] == [
            ("amy", "p2")
        ]

    def test_capacity_respected(self):
        snapshot = {
            (s, "p1"): SkillSnapshot(0.1, 0) for s in ("a", "b", "c", "d")
        }
        result = plan(list("abcd"), [slot("sl1", capacity=2)], snapshot)
        assert len(result.assignments) == 2
        assert len(result.unassigned) == 2

    def test_tie_break_spreads_assignments_across_students(self):
        # Two procedures, identical scores: nobody gets a second slot while
        # another student has none.
        snapshot = {
            (s, p): SkillSnapshot(0.5, 2)
            for s in ("a", "b")
            for p in ("p1", "p2")
        }
        result = plan(
            ["a", "b"], [slot("sl1", "p1"), slot("sl2", "p2")], snapshot
        )
        per_student = {}
        for a in result.assignments:
            per_student[a.student_id] = per_student.get(a.student_id, 0) + 1
        assert per_student == {"a": 1, "b": 1}

    def test_plan_table_export(self):
        snapshot = {("amy", "p1"): SkillSnapshot(0.3, 5)}
        table = plan(["amy"], [slot("sl1")], snapshot).to_table()
        assert table.splitlines()[0] == "student_id\tprocedure_id\tstatus\tslot_id"
        assert "amy\tp1\tassigned\tsl1" in table

    def test_duplicate_slot_ids_rejected(self):
        with pytest.raises(InvalidPlanConfig):
            plan([], [slot("sl1"), slot("sl1")], {})


def random_instance(rng, n_students=None, n_slots=None, single_procedure=False):
    n_students = n_students or int(rng.integers(1, 9))
    n_slots = n_slots if n_slots is not None else int(rng.integers(0, 9))
    students = [f"stu{k:02d}" for k in range(n_students)]
    procedures = ["p1"] if single_procedure else ["p1", "p2", "p3"]
    slots = [
        PatientSlot(
            slot_id=f"sl{k:02d}",
            procedure_id=procedures[rng.integers(0, len(procedures))],
            date=MAY,
            capacity=1 if single_procedure else int(rng.integers(1, 3)),
        )
        for k in range(n_slots)
    ]
    snapshot = {}
    for s in students:
        for p in procedures:
            if rng.random() < 0.15:
                continue  # missing pair: planner treats as no data
            consistency = None if rng.random() < 0.2 else float(rng.random())
            snapshot[(s, p)] = SkillSnapshot(consistency, int(rng.integers(0, 12)))
    return students, slots, snapshot


class TestPlanProperties:
    def test_capacity_never_exceeded_on_random_instances(self):
        rng = np.random.default_rng(47)
        for _ in range(300):
            students, slots, snapshot = random_instance(rng)
            result = plan(students, slots, snapshot)
            by_slot = {}
            for a in result.assignments:
                by_slot[a.slot_id] = by_slot.get(a.slot_id, 0) + 1
            caps = {s.slot_id: s.capacity for s in slots}
            assert all(by_slot[sid] <= caps[sid] for sid in by_slot)

    def test_assignment_and_holding_disjoint(self):
        rng = np.random.default_rng(53)
        for _ in range(100):
            students, slots, snapshot = random_instance(rng)
            result = plan(students, slots, snapshot)
            assigned = {(a.student_id, a.procedure_id) for a in result.assignments}
            holding = {(h.student_id, h.procedure_id) for h in result.holding}
            assert not (assigned & holding)

    def test_holding_monotonicity(self):
        rng = np.random.default_rng(59)
        config = PlanConfig()
        for _ in range(200):
            students, slots, snapshot = random_instance(rng)
            result = plan(students, slots, snapshot, config)
            holding = {(h.student_id, h.procedure_id) for h in result.holding}
            if not holding:
                continue
            pair = sorted(holding)[rng.integers(0, len(holding))]
            snap = snapshot[pair]
            boosted = dict(snapshot)
            boosted[pair] = SkillSnapshot(
                min(1.0, (snap.consistency or 0.0) + float(rng.random())),
                snap.experience,
            )
            after = plan(students, slots, boosted, config)
            assigned_after = {
                (a.student_id, a.procedure_id) for a in after.assignments
            }
            assert pair not in assigned_after

    def test_greedy_equals_exhaustive_on_unit_capacity_single_procedure(self):
        rng = np.random.default_rng(61)
        config = PlanConfig()
        for _ in range(60):
            students, slots, snapshot = random_instance(
                rng,
                n_students=int(rng.integers(1, 9)),
                n_slots=int(rng.integers(0, 9)),
                single_procedure=True,
            )
            result = plan(students, slots, snapshot, config)
            greedy_total = sum(
                priority_score(
                    snapshot.get(
                        (a.student_id, a.procedure_id), SkillSnapshot(None, 0)
                    ),
                    config,
                )
                for a in result.assignments
            )
            # Exhaustive oracle: try every subset of non-holding students of
            # size <= slot count. Holding eligibility re-derived from the
            # rule, since surplus-assigned students leave result.holding.
            held_students = set()
            eligible = []
            for s in students:
                snap = snapshot.get((s, "p1"), SkillSnapshot(None, 0))
                held = (
                    snap.consistency is not None
                    and snap.consistency >= config.hold_consistency
                    and snap.experience >= config.hold_min_experience
                )
                if held:
                    held_students.add(s)
                else:
                    eligible.append(priority_score(snap, config))
            best = 0.0
            for r in range(0, min(len(slots), len(eligible)) + 1):
                for combo in itertools.combinations(eligible, r):
                    best = max(best, sum(combo))
            # Holding students may soak up surplus; compare on demand only.
            demand_total = sum(
                priority_score(
                    snapshot.get(
                        (a.student_id, a.procedure_id), SkillSnapshot(None, 0)
                    ),
                    config,
                )
                for a in result.assignments
                if a.student_id not in held_students
            )
            assert demand_total == pytest.approx(best)
            assert greedy_total >= demand_total
