from __future__ import annotations

import itertools
from datetime import timedelta

import numpy as np
import pytest

from skilltrack.capture import (
    AlreadyCommitted,
    AlreadySignedOut,
    EmptyStudentSet,
    ItemNotInLocationWorkflows,
    MalformedBatch,
    NotInAttendance,
    StudentsStillOpen,
    SyncStore,
    batch_from_json,
    batch_to_json,
    open_session,
    record,
    staff_signout,
    student_signout,
    sync,
)
from skilltrack.domain import LockedRecord, Observation, UnknownReference

from conftest import utc


T0 = utc(2025, 3, 3, 9)


def obs(session, n, student="stu1", item="wa", proc="p1", indicator=4, minutes=5):
    return Observation(
        id=f"{session.id}-ob{n}",
        session_id=session.id,
        student_id=student,
        staff_id=session.staff_id,
        workflow_item_id=item,
        procedure_id=proc,
        indicator=indicator,
        timestamp=T0 + timedelta(minutes=minutes),
    )


def committed_batch(registry, students=("stu1",), n_obs=3, session_id="sessA",
                    batch_id=None, client_id="ipad-1"):
    session = open_session(
        registry, "loc1", "st1", students, T0, session_id=session_id
    )
    for n in range(n_obs):
        record(session, registry, obs(session, n, student=sorted(students)[0],
                                      minutes=n + 1))
    for student in sorted(students):
        student_signout(session, student, T0 + timedelta(hours=1))
    return staff_signout(
        session, T0 + timedelta(hours=2), client_id=client_id, batch_id=batch_id
    )


class TestOpenSession:
    def test_location_decides_offered_workflows(self, registry):
        session = open_session(registry, "loc2", "st1", {"stu1"}, T0)
        assert session.offered_procedures == frozenset({"p2"})

    def test_substitute_staff_is_attributed(self, registry):
        session = open_session(registry, "loc1", "st2", {"stu1"}, T0)
        assert session.staff_id == "st2"

    def test_unknown_location(self, registry):
        with pytest.raises(UnknownReference):
            open_session(registry, "nowhere", "st1", {"stu1"}, T0)

    def test_empty_student_set(self, registry):
        with pytest.raises(EmptyStudentSet):
            open_session(registry, "loc1", "st1", set(), T0)


class TestRecord:
    def test_eighteen_observations_in_one_session(self, registry):
        session = open_session(registry, "loc1", "st1", {"stu1"}, T0)
        for n in range(18):
            record(session, registry, obs(session, n, minutes=n + 1))
        assert len(session.observations) == 18

    def test_record_after_signout_is_locked(self, registry):
        session = open_session(registry, "loc1", "st1", {"stu1"}, T0)
        student_signout(session, "stu1", T0 + timedelta(minutes=30))
        with pytest.raises(LockedRecord):
            record(session, registry, obs(session, 99, minutes=40))

    def test_procedure_not_offered_at_location(self, registry):
        session = open_session(registry, "loc2", "st1", {"stu1"}, T0)  # p2 only
        with pytest.raises(ItemNotInLocationWorkflows):
            record(session, registry, obs(session, 0, item="wa", proc="p1"))

    def test_student_not_in_attendance(self, registry):
        session = open_session(registry, "loc1", "st1", {"stu1"}, T0)
        with pytest.raises(NotInAttendance):
            record(session, registry, obs(session, 0, student="stu2"))


class TestSignoutLifecycle:
    def test_each_student_locks_independently(self, registry):
        session = open_session(registry, "loc1", "st1", {"stu1", "stu2"}, T0)
        student_signout(session, "stu1", T0 + timedelta(minutes=50))
        assert session.is_locked("stu1") and not session.is_locked("stu2")
        student_signout(session, "stu2", T0 + timedelta(minutes=55))
        assert session.is_locked("stu2")

    def test_double_signout_rejected(self, registry):
        session = open_session(registry, "loc1", "st1", {"stu1"}, T0)
        student_signout(session, "stu1", T0 + timedelta(minutes=50))
        with pytest.raises(AlreadySignedOut):
            student_signout(session, "stu1", T0 + timedelta(minutes=51))

    def test_signout_with_zero_observations_freezes_empty_feedback(self, registry):
        session = open_session(registry, "loc1", "st1", {"stu1"}, T0)
        student_signout(session, "stu1", T0 + timedelta(minutes=5))
        assert session.feedback["stu1"].items == ()

    def test_feedback_snapshot_captures_comments_and_indicators(self, registry):
        session = open_session(registry, "loc1", "st1", {"stu1"}, T0)
        recorded = Observation(
            id="obX", session_id=session.id, student_id="stu1", staff_id="st1",
            workflow_item_id="wb", procedure_id="p1", indicator=5,
            timestamp=T0 + timedelta(minutes=2), comment="good margins",
        )
        record(session, registry, recorded)
        student_signout(session, "stu1", T0 + timedelta(minutes=9))
        item = session.feedback["stu1"].items[0]
        assert (item.indicator, item.comment) == (5, "good margins")

    def test_staff_signout_requires_all_students_out(self, registry):
        session = open_session(registry, "loc1", "st1", {"stu1", "stu2"}, T0)
        student_signout(session, "stu1", T0 + timedelta(minutes=50))
        with pytest.raises(StudentsStillOpen):
            staff_signout(session, T0 + timedelta(hours=1))

    def test_commit_happens_exactly_once(self, registry):
        session = open_session(registry, "loc1", "st1", {"stu1"}, T0)
        student_signout(session, "stu1", T0 + timedelta(minutes=50))
        staff_signout(session, T0 + timedelta(hours=1))
        with pytest.raises(AlreadyCommitted):
            staff_signout(session, T0 + timedelta(hours=2))
        with pytest.raises(AlreadyCommitted):
            record(session, registry, obs(session, 5, minutes=10))


class TestWireFormat:
    def test_round_trip(self, registry):
        batch = committed_batch(registry, n_obs=4, batch_id="b-1")
        clone = batch_from_json(batch_to_json(batch))
        assert clone.batch_id == batch.batch_id
        assert clone.session.id == batch.session.id
        assert clone.observations == batch.observations
        assert clone.feedback == batch.feedback
        assert batch_to_json(clone) == batch_to_json(batch)

    def test_uncommitted_session_rejected(self, registry):
        batch = committed_batch(registry, batch_id="b-2")
        text = batch_to_json(batch).replace('"committed"', '"active"')
        with pytest.raises(MalformedBatch):
            batch_from_json(text)

    def test_garbage_rejected(self):
        with pytest.raises(MalformedBatch):
            batch_from_json("{not json")
        with pytest.raises(MalformedBatch):
            batch_from_json('{"batch_id": "x"}')


class TestSyncStore:
    def test_apply_is_idempotent(self, registry):
        store = SyncStore()
        batch = committed_batch(registry, batch_id="b-1")
        first = sync(store, registry, batch)
        state_once = store.state_hash()
        second = sync(store, registry, batch)
        assert first.applied and not second.applied
        assert store.state_hash() == state_once

    def test_two_clients_same_day_both_present(self, registry):
        store = SyncStore()
        sync(store, registry, committed_batch(
            registry, session_id="sessA", batch_id="b-1", client_id="ipad-1"))
        sync(store, registry, committed_batch(
            registry, students=("stu2",), session_id="sessB", batch_id="b-2",
            client_id="ipad-2"))
        assert len(store.sessions) == 2

    def test_invalid_observation_rejects_whole_batch(self, registry):
        store = SyncStore()
        good = committed_batch(registry, session_id="sessA", batch_id="b-1")
        sync(store, registry, good)
        before = store.state_hash()

        bad = committed_batch(registry, session_id="sessB", batch_id="b-2")
        # Corrupt the observations: item wd does not belong to procedure p1.
        text = batch_to_json(bad).replace('"workflow_item_id":"wa"',
                                          '"workflow_item_id":"wd"')
        corrupted = batch_from_json(text)
        with pytest.raises(Exception):
            sync(store, registry, corrupted)
        assert store.state_hash() == before
        assert "sessB" not in store.sessions

    def test_duplicate_session_under_new_batch_id_rejected(self, registry):
        store = SyncStore()
        sync(store, registry, committed_batch(registry, batch_id="b-1"))
        dupe = committed_batch(registry, batch_id="b-2")  # same session id
        with pytest.raises(MalformedBatch):
            sync(store, registry, dupe)

    def test_permutation_and_duplication_invariance(self, registry):
        batches = [
            committed_batch(registry, session_id=f"sess{k}", batch_id=f"b-{k}")
            for k in range(4)
        ]
        hashes = set()
        rng = np.random.default_rng(3)
        for perm in itertools.permutations(batches):
            store = SyncStore()
            play = list(perm) + [perm[rng.integers(0, len(perm))]] * 2
            for batch in play:
                sync(store, registry, batch)
            hashes.add(store.state_hash())
        assert len(hashes) == 1

    def test_every_observation_reachable_from_exactly_one_batch(self, registry):
        store = SyncStore()
        for k in range(5):
            sync(store, registry, committed_batch(
                registry, session_id=f"sess{k}", batch_id=f"b-{k}", n_obs=k + 1))
        seen: dict[str, str] = {}
        for session_id, batch_id in store.batch_of_session.items():
            for o in store.sessions[session_id].observations:
                assert o.id not in seen
                seen[o.id] = batch_id
        assert set(seen) == set(store.observations)  # no loss, no duplication


class TestLifecycleStateMachine:
    def test_random_operation_sequences_never_violate_locks(self, registry):
        rng = np.random.default_rng(17)
        students = ["stu1", "stu2", "stu3"]
        session = open_session(registry, "loc1", "st1", students, T0)
        # Shadow oracle: an independent dict tracking who may still be written.
        shadow_open = {s: True for s in students}
        shadow_committed = False
        counter = 0
        for step in range(5000):
            op = rng.integers(0, 4)
            student = students[rng.integers(0, len(students))]
            when = T0 + timedelta(minutes=step + 1)
            if op in (0, 1):  # record
                counter += 1
                try:
                    record(session, registry, obs(
                        session, f"r{counter}", student=student,
                        minutes=step + 1))
                    assert shadow_open[student] and not shadow_committed
                except (LockedRecord, AlreadyCommitted):
                    assert not shadow_open[student] or shadow_committed
            elif op == 2:  # student sign-out
                try:
                    student_signout(session, student, when)
                    assert shadow_open[student] and not shadow_committed
                    shadow_open[student] = False
                except (AlreadySignedOut, AlreadyCommitted):
                    assert not shadow_open[student] or shadow_committed
            else:  # staff sign-out
                try:
                    staff_signout(session, when, batch_id=f"b{step}")
                    assert not any(shadow_open.values()) and not shadow_committed
                    shadow_committed = True
                except StudentsStillOpen:
                    assert any(shadow_open.values())
                except AlreadyCommitted:
                    assert shadow_committed
        # Cross-check: every stored observation was recorded pre-signout.
        signout_times = {
            s: f.signed_out_at for s, f in session.feedback.items()
        }
        for o in session.observations:
            if o.student_id in signout_times:
                assert o.timestamp <= signout_times[o.student_id]
