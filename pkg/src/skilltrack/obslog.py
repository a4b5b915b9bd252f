"""Columnar observation log.

A log is an immutable snapshot of observations held as numpy arrays of integer
codes into small id tables, plus a per-session metadata table. The default
synthetic cohort is ~1.5 million observations, which rules out one dataclass
per row; at the capture/sync edges observations are ordinary
``domain.Observation`` objects and get converted here for analytics.

Timestamps are stored as integer epoch seconds (UTC).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Iterator, Mapping

import numpy as np

from .domain import Observation, Session


def to_epoch(ts: datetime) -> int:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return int(ts.timestamp())


def from_epoch(seconds: int) -> datetime:
    return datetime.fromtimestamp(int(seconds), tz=timezone.utc)


@dataclass(frozen=True)
class SessionInfo:
    id: str
    location_id: str
    staff_id: str
    student_ids: tuple[str, ...]
    opened_at: int
    closed_at: int


@dataclass(frozen=True)
class ObsRow:
    """One observation, decoded. Used by oracle-style row iteration."""

    id: str
    session_id: str
    student_id: str
    staff_id: str
    item_id: str
    procedure_id: str
    indicator: int
    ts: int


class ObservationLog:
    """Immutable columnar store of observations.

    ``students``, ``staff``, ``items``, ``procedures`` are id tables; the
    per-observation arrays hold int32 codes into them plus the indicator
    (int8) and timestamp (int64 epoch seconds). ``sessions`` is the session
    metadata table aligned with the ``session`` code array.
    """

    def __init__(
        self,
        students: list[str],
        staff: list[str],
        items: list[str],
        procedures: list[str],
        sessions: list[SessionInfo],
        student: np.ndarray,
        staff_member: np.ndarray,
        session: np.ndarray,
        item: np.ndarray,
        procedure: np.ndarray,
        indicator: np.ndarray,
        ts: np.ndarray,
        obs_ids: np.ndarray | None = None,
    ) -> None:
        self.students = students
        self.staff = staff
        self.items = items
        self.procedures = procedures
        self.sessions = sessions
        self.student = np.asarray(student, dtype=np.int32)
        self.staff_member = np.asarray(staff_member, dtype=np.int32)
        self.session = np.asarray(session, dtype=np.int32)
        self.item = np.asarray(item, dtype=np.int32)
        self.procedure = np.asarray(procedure, dtype=np.int32)
        self.indicator = np.asarray(indicator, dtype=np.int8)
        self.ts = np.asarray(ts, dtype=np.int64)
        self._obs_ids = obs_ids
        n = len(self.student)
        for arr in (self.staff_member, self.session, self.item,
                    self.procedure, self.indicator, self.ts):
            if len(arr) != n:
                raise ValueError("observation columns have mismatched lengths")
        if obs_ids is not None and len(obs_ids) != n:
            raise ValueError("obs_ids length mismatch")
        self._index = {
            "student": {s: i for i, s in enumerate(students)},
            "staff": {s: i for i, s in enumerate(staff)},
            "item": {s: i for i, s in enumerate(items)},
            "procedure": {s: i for i, s in enumerate(procedures)},
        }
        self.session_opened_at = np.asarray(
            [s.opened_at for s in sessions], dtype=np.int64
        )

    # -- basics ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.student)

    @property
    def n_sessions(self) -> int:
        return len(self.sessions)

    def obs_ids(self) -> np.ndarray:
        """Observation ids; synthesized as o<row> when not stored explicitly."""
        if self._obs_ids is None:
            n = len(self)
            ids = np.char.add("o", np.arange(n).astype("U10"))
            self._obs_ids = ids
        return self._obs_ids

    def code_of(self, table: str, entity_id: str) -> int | None:
        return self._index[table].get(entity_id)

    def row(self, i: int) -> ObsRow:
        return ObsRow(
            id=str(self.obs_ids()[i]),
            session_id=self.sessions[int(self.session[i])].id,
            student_id=self.students[int(self.student[i])],
            staff_id=self.staff[int(self.staff_member[i])],
            item_id=self.items[int(self.item[i])],
            procedure_id=self.procedures[int(self.procedure[i])],
            indicator=int(self.indicator[i]),
            ts=int(self.ts[i]),
        )

    def iter_rows(self) -> Iterator[ObsRow]:
        for i in range(len(self)):
            yield self.row(i)

    def with_indicators(self, indicator: np.ndarray) -> "ObservationLog":
        """Copy of the log with a replaced indicator column."""
        indicator = np.asarray(indicator, dtype=np.int8)
        if indicator.shape != self.indicator.shape:
            raise ValueError("indicator column shape mismatch")
        if len(indicator) and (indicator.min() < 1 or indicator.max() > 6):
            raise ValueError("indicator values outside 1..6")
        return ObservationLog(
            self.students, self.staff, self.items, self.procedures,
            self.sessions, self.student, self.staff_member, self.session,
            self.item, self.procedure, indicator, self.ts,
            obs_ids=self._obs_ids,
        )

    # -- construction ------------------------------------------------------

    @classmethod
    def empty(cls) -> "ObservationLog":
        z = np.zeros(0, dtype=np.int64)
        return cls([], [], [], [], [], z, z, z, z, z, z, z)

    @classmethod
    def from_observations(
        cls,
        observations: Iterable[Observation],
        sessions: Mapping[str, Session],
    ) -> "ObservationLog":
        """Build a log from domain observations plus their sessions.

        Sessions without a close time use their open time; analytics only key
        off opened_at.
        """
        obs = list(observations)
        students: dict[str, int] = {}
        staff: dict[str, int] = {}
        items: dict[str, int] = {}
        procedures: dict[str, int] = {}
        session_codes: dict[str, int] = {}
        session_infos: list[SessionInfo] = []

        def code(table: dict[str, int], key: str) -> int:
            if key not in table:
                table[key] = len(table)
            return table[key]

        cols = {k: [] for k in
                ("student", "staff", "session", "item", "procedure", "ind", "ts")}
        ids = []
        for o in obs:
            if o.session_id not in session_codes:
                sess = sessions.get(o.session_id)
                if sess is None:
                    raise KeyError(f"no session metadata for {o.session_id}")
                session_codes[o.session_id] = len(session_infos)
                opened = to_epoch(sess.opened_at)
                closed = to_epoch(sess.closed_at) if sess.closed_at else opened
                session_infos.append(
                    SessionInfo(
                        id=sess.id,
                        location_id=sess.location_id,
                        staff_id=sess.staff_id,
                        student_ids=tuple(sorted(sess.student_ids)),
                        opened_at=opened,
                        closed_at=closed,
                    )
                )
            cols["student"].append(code(students, o.student_id))
            cols["staff"].append(code(staff, o.staff_id))
            cols["session"].append(session_codes[o.session_id])
            cols["item"].append(code(items, o.workflow_item_id))
            cols["procedure"].append(code(procedures, o.procedure_id))
            cols["ind"].append(o.indicator)
            cols["ts"].append(to_epoch(o.timestamp))
            ids.append(o.id)

        return cls(
            students=list(students),
            staff=list(staff),
            items=list(items),
            procedures=list(procedures),
            sessions=session_infos,
            student=np.asarray(cols["student"], dtype=np.int32),
            staff_member=np.asarray(cols["staff"], dtype=np.int32),
            session=np.asarray(cols["session"], dtype=np.int32),
            item=np.asarray(cols["item"], dtype=np.int32),
            procedure=np.asarray(cols["procedure"], dtype=np.int32),
            indicator=np.asarray(cols["ind"], dtype=np.int8),
            ts=np.asarray(cols["ts"], dtype=np.int64),
            obs_ids=np.asarray(ids, dtype=str) if ids else np.zeros(0, dtype="U1"),
        )
