"""
Outcome coverage, blueprint verification and exam generation
============================================================

Every workflow item, teaching unit and exam question maps to one or more
learning outcomes. Coverage queries answer "how much evidence exists per
outcome"; blueprints express accreditation-style minimum coverage; exam
generation picks a question set that satisfies a blueprint greedily and
deterministically.
"""

from skilltrack import (
    BlueprintConstraint,
    coverage_report,
    edges_from_registry,
    generate_exam,
    question_performance,
    record_question_result,
    verify_blueprint,
)
from skilltrack.mapping import InfeasibleBlueprint
from skilltrack.synth import CohortConfig, generate

# A small synthetic program gives us a mapped registry plus observations.
registry, log = generate(CohortConfig(
    n_students=8, n_staff=6, n_locations=3, n_outcomes=10, n_procedures=4,
    n_questions=12, items_per_procedure=5, years=0.5,
    teaching_weeks_per_year=20, sessions_per_student_week=1.0,
    mean_observations_per_session=6.0, locations_per_program=2,
    procedures_per_location=2, seed=1,
))
edges = edges_from_registry(registry)

# Coverage: one row per outcome, evidence counted per source kind.
report = coverage_report(registry, edges, log)
print("coverage (first 5 outcomes):")
for line in report.to_table().splitlines()[:6]:
    print("  " + line)

# Blueprint verification: does this exam satisfy the requirements?
bank = list(registry.questions.values())
constraints = [
    BlueprintConstraint(outcome_id="o001", min_questions=1),
    BlueprintConstraint(outcome_id="o002", min_questions=1),
]
exam = generate_exam(bank, constraints, size_limit=6)
check = verify_blueprint(exam, constraints, edges)
print(f"\ngenerated exam {exam}: blueprint passed = {check.passed}")
for c in check.checks:
    print(f"  outcome {c.constraint.outcome_id}: "
          f"actual {c.actual} >= {c.constraint.min_questions}")

# Impossible requirements are reported with the offending constraint.
try:
    generate_exam(bank, [BlueprintConstraint("o001", 99)], size_limit=6)
except InfeasibleBlueprint as exc:
    print(f"infeasible blueprint: witness outcome "
          f"{exc.constraint.outcome_id} needs {exc.constraint.min_questions}")

# Question performance accumulates as exams are marked.
qid = exam[0]
for correct in (True, True, False):
    record_question_result(registry.questions, qid, correct)
perf = question_performance(registry.questions, qid)
print(f"\nquestion {qid}: {perf.attempts} attempts, "
      f"difficulty {perf.difficulty:.2f}")
