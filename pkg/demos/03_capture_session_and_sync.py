"""
The capture lifecycle and offline-first sync
============================================

A tablet client works through one clinical session: open at a location (which
selects the workflows on offer), record whatever is actually observed, let
each student sign out against a frozen feedback snapshot, then the staff
sign-out commits the session into an uploadable batch. Batches apply to the
server store atomically and idempotently, so flaky connectivity can only ever
delay data, not lose or duplicate it.
"""

from datetime import datetime, timedelta, timezone

from skilltrack import (
    batch_from_json,
    batch_to_json,
    open_session,
    record,
    registry_load,
    staff_signout,
    student_signout,
    sync,
)
from skilltrack.capture import SyncStore
from skilltrack.domain import LockedRecord, Observation

registry = registry_load("""\
outcomes:
  - {id: oA, label: Assessment}
items:
  - {id: w1, label: History, outcome_ids: [oA]}
  - {id: w2, label: Charting, outcome_ids: [oA]}
procedures:
  - {id: exam, label: Oral examination, workflow: [w1, w2]}
staff:
  - {id: st1, name: Dr Example}
students:
  - {id: amy, cohort: "2025", enrollment_date: 2025-09-01}
  - {id: ben, cohort: "2025", enrollment_date: 2025-09-01}
locations:
  - {id: clinic, name: Teaching clinic, available_procedures: [exam]}
""")

t0 = datetime(2025, 10, 6, 9, 0, tzinfo=timezone.utc)
session = open_session(registry, "clinic", "st1", {"amy", "ben"}, t0)
print(f"session {session.id[:13]}... offers {sorted(session.offered_procedures)}")

# Staff record only what they see; any subset of the workflow is fine.
for minute, (student, item, level, note) in enumerate([
    ("amy", "w1", 4, None),
    ("amy", "w2", 5, "clear charting"),
    ("ben", "w1", 3, "needed prompting"),
]):
    record(session, registry, Observation(
        id=f"ob{minute}", session_id=session.id, student_id=student,
        staff_id="st1", workflow_item_id=item, procedure_id="exam",
        indicator=level, timestamp=t0 + timedelta(minutes=minute + 1),
        comment=note,
    ))
print(f"recorded {len(session.observations)} observations")

# Sign-out freezes the student's feedback and locks their record.
student_signout(session, "amy", t0 + timedelta(hours=1))
print(f"amy's frozen feedback: {len(session.feedback['amy'].items)} items")
try:
    record(session, registry, Observation(
        id="late", session_id=session.id, student_id="amy", staff_id="st1",
        workflow_item_id="w1", procedure_id="exam", indicator=6,
        timestamp=t0 + timedelta(hours=1, minutes=1),
    ))
except LockedRecord as exc:
    print(f"late write refused: {exc}")

student_signout(session, "ben", t0 + timedelta(hours=1, minutes=2))
batch = staff_signout(session, t0 + timedelta(hours=1, minutes=5),
                      client_id="ipad-07")
print(f"staff signed out -> batch {batch.batch_id[:14]}... "
      f"({len(batch.observations)} observations)")

# The batch is one self-contained JSON document.
wire = batch_to_json(batch)
print(f"wire format: {len(wire)} bytes of JSON")

# Applying twice changes nothing: the batch id is an idempotency key.
store = SyncStore()
first = sync(store, registry, batch_from_json(wire))
state_after_first = store.state_hash()
second = sync(store, registry, batch_from_json(wire))
print(f"first apply: applied={first.applied}; "
      f"second apply: applied={second.applied}")
assert store.state_hash() == state_after_first
print(f"store state hash unchanged: {state_after_first[:16]}...")
