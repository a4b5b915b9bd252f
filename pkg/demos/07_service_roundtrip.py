"""
The HTTP service: event-sourced persistence behind a JSON API
=============================================================

The service fronts every library operation over HTTP with a file-backed event
log underneath; restarting a server replays the log into the identical state.
This script starts a server on a free port, drives a registry load, a capture
batch and a couple of reports through the API, then proves the restart
equivalence.
"""

import json
import tempfile
import threading
import urllib.request
from datetime import datetime, timedelta, timezone
from pathlib import Path

from skilltrack import batch_to_json, open_session, record, staff_signout, \
    student_signout
from skilltrack.domain import Observation
from skilltrack.eventlog import PersistentState
from skilltrack.registry import registry_load
from skilltrack.service import coverage_payload, make_server

DOCUMENT = """\
outcomes:
  - {id: oA, label: Assessment}
items:
  - {id: w1, label: History, outcome_ids: [oA]}
procedures:
  - {id: exam, label: Oral examination, workflow: [w1]}
staff:
  - {id: st1, name: Dr Example}
students:
  - {id: amy, cohort: "2025", enrollment_date: 2025-09-01}
locations:
  - {id: clinic, name: Teaching clinic, available_procedures: [exam]}
"""


def http(method, url, body=None):
    request = urllib.request.Request(url, data=body, method=method)
    with urllib.request.urlopen(request) as response:
        return json.loads(response.read())


data_dir = Path(tempfile.mkdtemp(prefix="skilltrack-demo-"))
persistent = PersistentState(data_dir)
server = make_server(persistent, port=0)
threading.Thread(target=server.serve_forever, daemon=True).start()
base = f"http://127.0.0.1:{server.server_address[1]}"
print(f"service listening on {base}, data in {data_dir}")

print("POST /registry ->", http("POST", f"{base}/registry", DOCUMENT.encode()))

# One recorded session, committed client-side, uploaded through /sync.
registry = registry_load(DOCUMENT)
t0 = datetime(2025, 10, 6, 9, 0, tzinfo=timezone.utc)
session = open_session(registry, "clinic", "st1", {"amy"}, t0,
                       session_id="demo-session")
for n in range(5):
    record(session, registry, Observation(
        id=f"ob{n}", session_id=session.id, student_id="amy", staff_id="st1",
        workflow_item_id="w1", procedure_id="exam",
        indicator=3 + (n % 3), timestamp=t0 + timedelta(minutes=n + 1),
    ))
student_signout(session, "amy", t0 + timedelta(hours=1))
batch = staff_signout(session, t0 + timedelta(hours=1, minutes=5),
                      batch_id="demo-batch")
print("POST /sync ->", http("POST", f"{base}/sync",
                            batch_to_json(batch).encode()))

print("GET /students/amy/consistency ->",
      http("GET", f"{base}/students/amy/consistency"))
print("GET /students/amy/barcode ->",
      http("GET", f"{base}/students/amy/barcode")["text"])
print("GET /sessions ->",
      [s["id"] for s in http("GET", f"{base}/sessions")["sessions"]])

server.shutdown()
server.server_close()

# Kill-and-replay: a fresh process over the same directory sees the same state.
replayed = PersistentState(data_dir)
assert coverage_payload(replayed.state) == coverage_payload(persistent.state)
print("replayed state matches live state byte-for-byte")
