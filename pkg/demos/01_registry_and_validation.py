"""
Entity registry: the document format and referential integrity
===============================================================

Everything in the platform hangs off one entity-definition document: learning
outcomes, procedures with ordered workflows, staff, students, locations and
the exam question bank. Loading resolves every cross-reference up front, so
downstream code never meets a dangling id.
"""

from datetime import datetime, timezone

from skilltrack import registry_load, serialize, validate_observation
from skilltrack.domain import Observation, ScaleViolation
from skilltrack.registry import DanglingReference

DOCUMENT = """\
outcomes:
  - {id: oA, label: Patient assessment, authority: external-stakeholder}
  - {id: oB, label: Communication}
items:
  - {id: w1, label: Medical history, outcome_ids: [oA]}
  - {id: w2, label: Consent discussion, outcome_ids: [oA, oB]}
procedures:
  - {id: exam, label: Oral examination, workflow: [w1, w2]}
staff:
  - {id: st1, name: Dr Example}
students:
  - {id: stu1, cohort: "2025", enrollment_date: 2025-09-01}
locations:
  - {id: clinic, name: Teaching clinic, available_procedures: [exam]}
questions:
  - {id: q1, text: "Which assessment comes first?", outcome_ids: [oA]}
"""

registry = registry_load(DOCUMENT)
print(f"loaded: {len(registry.outcomes)} outcomes, "
      f"{len(registry.procedures)} procedures, {len(registry.items)} items")

# The document round-trips: serialize() is the exact inverse of loading.
assert registry_load(serialize(registry)) == registry
print("round-trip: serialize -> load reproduces the registry")

# A valid observation passes through unchanged.
obs = Observation(
    id="ob1", session_id="s1", student_id="stu1", staff_id="st1",
    workflow_item_id="w1", procedure_id="exam", indicator=4,
    timestamp=datetime(2025, 10, 1, 9, 30, tzinfo=timezone.utc),
)
validate_observation(obs, registry)
print(f"observation {obs.id} accepted (indicator {obs.indicator})")

# The 6-point scale is closed: a 7 can never enter the system.
try:
    Observation(
        id="ob2", session_id="s1", student_id="stu1", staff_id="st1",
        workflow_item_id="w1", procedure_id="exam", indicator=7,
        timestamp=datetime(2025, 10, 1, 9, 31, tzinfo=timezone.utc),
    )
except ScaleViolation as exc:
    print(f"indicator 7 rejected: {exc}")

# Referential integrity is checked wholesale at load time.
try:
    registry_load("procedures:\n  - {id: p, label: x, workflow: [ghost]}\n")
except DanglingReference as exc:
    print(f"dangling reference rejected: {exc}")
