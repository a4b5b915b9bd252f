from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from skilltrack.registry import registry_load

SMALL_DOC = """\
outcomes:
  - {id: oA, label: Diagnosis, authority: external-stakeholder}
  - {id: oB, label: Communication}
  - {id: oC, label: Management}
items:
  - {id: wa, label: History taking, outcome_ids: [oA, oB]}
  - {id: wb, label: Examination, outcome_ids: [oA]}
  - {id: wc, label: Treatment plan, outcome_ids: [oC]}
  - {id: wd, label: Anaesthesia, outcome_ids: [oB]}
  - {id: we, label: Restoration}
procedures:
  - {id: p1, label: Checkup, workflow: [wa, wb, wc]}
  - {id: p2, label: Filling, workflow: [wd, we]}
staff:
  - {id: st1, name: Dr One}
  - {id: st2, name: Dr Two}
students:
  - {id: stu1, cohort: "2024", enrollment_date: 2024-09-01}
  - {id: stu2, cohort: "2024", enrollment_date: 2024-09-01}
  - {id: stu3, cohort: "2023", enrollment_date: 2023-09-01}
locations:
  - {id: loc1, name: Clinic North, available_procedures: [p1, p2]}
  - {id: loc2, name: Clinic South, available_procedures: [p2]}
questions:
  - {id: q1, text: First question, outcome_ids: [oA]}
  - {id: q2, text: Second question, outcome_ids: [oB, oC]}
  - {id: q3, text: Third question, outcome_ids: [oC], attempts: 10, correct: 7}
teaching:
  - {id: tu1, label: Lecture block, outcome_ids: [oA, oC]}
"""


@pytest.fixture
def registry():
    return registry_load(SMALL_DOC)


def utc(y, mo, d, h=9, mi=0, s=0):
    return datetime(y, mo, d, h, mi, s, tzinfo=timezone.utc)


def log_from_rows(rows):
    """Build an ObservationLog from compact row tuples.

    rows: (session_id, student_id, staff_id, item_id, procedure_id,
           indicator, ts_epoch). Session metadata is inferred: opened_at is
    the session's earliest timestamp minus 60s, location loc1, staff from the
    first row of the session.
    """
    from skilltrack.domain import Observation, Session, SessionState, StudentLockState
    from skilltrack.obslog import ObservationLog, from_epoch

    observations = []
    session_rows: dict[str, list] = {}
    for n, row in enumerate(rows):
        session_id, student_id, staff_id, item_id, proc_id, indicator, ts = row
        observations.append(
            Observation(
                id=f"ob{n:04d}",
                session_id=session_id,
                student_id=student_id,
                staff_id=staff_id,
                workflow_item_id=item_id,
                procedure_id=proc_id,
                indicator=indicator,
                timestamp=from_epoch(ts),
            )
        )
        session_rows.setdefault(session_id, []).append(observations[-1])

    sessions = {}
    for session_id, obs in session_rows.items():
        times = [o.timestamp for o in obs]
        sessions[session_id] = Session(
            id=session_id,
            location_id="loc1",
            staff_id=obs[0].staff_id,
            student_ids=frozenset(o.student_id for o in obs),
            opened_at=min(times) - timedelta(seconds=60),
            offered_procedures=frozenset(o.procedure_id for o in obs),
            closed_at=max(times) + timedelta(seconds=60),
            state=SessionState.COMMITTED,
            student_states={
                o.student_id: StudentLockState.SIGNED_OUT for o in obs
            },
        )
    return ObservationLog.from_observations(observations, sessions)
