"""
Sessional consistency and barcode views
=======================================

Counting procedures says nothing about performance over time. The platform's
central metric is sessional consistency: the fraction of a student's
applicable sessions whose weakest in-scope observation still meets the
threshold. The barcode renders the same data as a chronological strip, one
cell per observation, which makes "performs consistently well" and "capable
but erratic" instantly distinguishable.
"""

from skilltrack import (
    ConsistencyQuery,
    Scope,
    ScopeKind,
    barcode,
    portfolio,
    sessional_consistency,
)
from skilltrack.analytics import PortfolioConfig, Window
from skilltrack.synth import CohortConfig, generate, inject_anomaly

# Generate a cohort that learns quickly, then plant one erratic student.
registry, log = generate(CohortConfig(
    n_students=6, n_staff=6, n_locations=3, n_outcomes=10, n_procedures=4,
    n_questions=0, n_teaching_units=0, items_per_procedure=5, years=1.0,
    teaching_weeks_per_year=30, sessions_per_student_week=1.5,
    mean_observations_per_session=8.0, locations_per_program=3,
    procedures_per_location=2, learning_rate=2.0, noise_level=0.3,
    staff_strictness_spread=0.2, seed=5,
))
steady, erratic = log.students[0], log.students[1]
log, labels = inject_anomaly(
    log, "inconsistent-student",
    {"student_ids": [erratic], "below_rate": 0.45}, seed=2,
)

for student in (steady, erratic):
    result = sessional_consistency(log, ConsistencyQuery(student))
    code = barcode(log, ConsistencyQuery(student, window=Window(last_n=12)))
    tag = "erratic" if student == erratic else "steady"
    print(f"{student} ({tag}): consistency {result.numerator}/"
          f"{result.denominator} = {result.fraction:.2f}")
    print(f"  last sessions: {code.text()}")

# Raising the threshold can only switch cells off, never on.
for threshold in (3, 4, 5):
    code = barcode(log, ConsistencyQuery(steady, threshold=threshold,
                                         window=Window(last_n=12)))
    print(f"threshold {threshold}: {code.text()}")

# Scope narrows the question: one procedure instead of the whole program.
proc = log.procedures[0]
scoped = sessional_consistency(
    log, ConsistencyQuery(steady, scope=Scope(ScopeKind.PROCEDURE, proc))
)
print(f"\n{steady} on {proc} alone: "
      f"{scoped.numerator}/{scoped.denominator} applicable sessions meet")

# Students who were never observed on a skill are undefined, not 0%.
ghost = sessional_consistency(
    log, ConsistencyQuery(steady, scope=Scope(ScopeKind.ITEM, "w01_01"),
                          window=Window(last_n=1, ts_to=0))
)
print(f"empty window: fraction={ghost.fraction} "
      f"(undefined, never reported as 0.0)")

# The portfolio rolls consistency and experience into per-procedure rows.
print(f"\nportfolio for {steady}:")
entries = portfolio(log, registry, steady,
                    PortfolioConfig(min_experience=5, sufficiency_threshold=0.8))
for e in entries:
    consistency = "NA" if e.consistency is None else f"{e.consistency:.2f}"
    print(f"  {e.procedure_id}: {e.experience} sessions, "
          f"consistency {consistency}, sufficient={e.sufficient}")
