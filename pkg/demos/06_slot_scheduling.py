"""
Adaptive allocation of scarce patient slots
===========================================

Patients needing a given treatment are a limited resource. The planner reads
each student's consistency and experience per procedure, parks already
consistent students in holding patterns, and allocates everyone else to slots
in descending priority (consistency gap plus experience gap). Spare capacity
flows back to holding students, shifting their practice toward less
contested treatments.
"""

import datetime as dt

from skilltrack import PatientSlot, PlanConfig, plan, priority_score
from skilltrack.eventlog import build_snapshot
from skilltrack.scheduling import SkillSnapshot
from skilltrack.synth import CohortConfig, generate

registry, log = generate(CohortConfig(
    n_students=8, n_staff=6, n_locations=3, n_outcomes=10, n_procedures=4,
    n_questions=0, n_teaching_units=0, items_per_procedure=5, years=2.0,
    teaching_weeks_per_year=30, sessions_per_student_week=1.0,
    mean_observations_per_session=8.0, locations_per_program=3,
    procedures_per_location=2, learning_rate=1.2, noise_level=0.4, seed=21,
))

config = PlanConfig(hold_consistency=0.75, hold_min_experience=8)
snapshot = build_snapshot(log, registry, config)

# Priority is explainable: need grows with inconsistency and inexperience.
for snap, label in [
    (SkillSnapshot(None, 0), "never observed"),
    (SkillSnapshot(0.5, 4), "halfway there"),
    (SkillSnapshot(1.0, 10), "fully consistent"),
]:
    print(f"priority({label}) = {priority_score(snap, config):.2f}")

monday = dt.date(2025, 10, 6)
slots = [
    PatientSlot("slot-a1", "p01", monday, capacity=2),
    PatientSlot("slot-a2", "p01", monday, capacity=1),
    PatientSlot("slot-b1", "p02", monday, capacity=2),
]
result = plan(sorted(registry.students), slots, snapshot, config)

print(f"\n{len(result.assignments)} assigned, {len(result.holding)} holding, "
      f"{len(result.unassigned)} unmet demand")
print(result.to_table())
