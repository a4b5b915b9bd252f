import { describe, expect, it } from "vitest";

import { EntryError, EntrySession, isoUtc } from "../src/entryGrid.js";
import type { ProcedureRef } from "../src/entryGrid.js";

const EXAM: ProcedureRef = {
  id: "exam",
  label: "Oral examination",
  workflow: [
    { id: "w1", label: "History" },
    { id: "w2", label: "Charting" },
    { id: "w3", label: "Plan" },
  ],
};

function start(students = ["amy", "ben"]) {
  return new EntrySession({
    locationId: "clinic",
    staffId: "st1",
    studentIds: students,
    procedures: [EXAM],
    openedAt: new Date("2025-10-06T09:00:00Z"),
    sessionId: "sess-test",
    clientId: "test-client",
  });
}

const at = (minute: number) => new Date(Date.UTC(2025, 9, 6, 9, minute));

describe("EntrySession", () => {
  it("renders the grid in workflow order with latest indicators", () => {
    const session = start();
    session.recordTap("amy", "exam", "w2", 3, at(1));
    session.recordTap("amy", "exam", "w2", 5, at(2)); // re-tap overrides
    session.recordTap("amy", "exam", "w1", 4, at(3));
    const grid = session.grid("amy", "exam");
    expect(grid.map((c) => c.item.id)).toEqual(["w1", "w2", "w3"]);
    expect(grid.map((c) => c.indicator)).toEqual([4, 5, null]);
    expect(grid.every((c) => !c.locked)).toBe(true);
  });

  it("tracks dirty cells until marked synced", () => {
    const session = start();
    session.recordTap("amy", "exam", "w1", 4, at(1));
    expect(session.grid("amy", "exam")[0].dirty).toBe(true);
    session.markSynced();
    expect(session.grid("amy", "exam")[0].dirty).toBe(false);
  });

  it("rejects taps outside the offered workflows or scale", () => {
    const session = start();
    expect(() => session.recordTap("amy", "filling", "w1", 4, at(1))).toThrow(
      EntryError,
    );
    expect(() => session.recordTap("amy", "exam", "w9", 4, at(1))).toThrow(
      EntryError,
    );
    expect(() => session.recordTap("amy", "exam", "w1", 7, at(1))).toThrow(
      EntryError,
    );
    expect(() => session.recordTap("zoe", "exam", "w1", 4, at(1))).toThrow(
      EntryError,
    );
  });

  it("locks a student at sign-out and freezes their feedback", () => {
    const session = start();
    session.recordTap("amy", "exam", "w1", 4, at(1), "steady hands");
    const feedback = session.signOutStudent("amy", at(50));
    expect(feedback.items).toHaveLength(1);
    expect(feedback.items[0].comment).toBe("steady hands");
    expect(session.grid("amy", "exam")[0].locked).toBe(true);
    expect(() => session.recordTap("amy", "exam", "w2", 5, at(51))).toThrow(
      /locked/,
    );
    expect(() => session.signOutStudent("amy", at(52))).toThrow(
      /already signed out/,
    );
    // Ben is unaffected and more observations for him are fine.
    session.recordTap("ben", "exam", "w1", 3, at(53));
  });

  it("staff sign-out requires every student out, then commits once", () => {
    const session = start();
    session.recordTap("amy", "exam", "w1", 4, at(1));
    session.signOutStudent("amy", at(10));
    expect(() => session.signOutStaff(at(11))).toThrow(/still open/);
    session.signOutStudent("ben", at(12));
    const batchJson = session.signOutStaff(at(13), "batch-1");
    expect(session.state).toBe("committed");
    expect(() => session.signOutStaff(at(14))).toThrow(/committed/);
    expect(() => session.recordTap("ben", "exam", "w2", 4, at(15))).toThrow(
      /committed/,
    );

    const batch = JSON.parse(batchJson);
    expect(batch.batch_id).toBe("batch-1");
    expect(batch.session.state).toBe("committed");
    expect(batch.session.student_ids).toEqual(["amy", "ben"]);
    expect(batch.observations).toHaveLength(1);
    expect(batch.feedback).toHaveLength(2);
    // Wire format timestamps use the +00:00 offset form.
    expect(batch.session.opened_at.endsWith("+00:00")).toBe(true);
  });

  it("supports rapid switching between students", () => {
    const session = start();
    expect(session.selectedStudent).toBe("amy");
    session.selectStudent("ben");
    expect(session.selectedStudent).toBe("ben");
    expect(() => session.selectStudent("zoe")).toThrow(EntryError);
  });

  it("isoUtc emits python-3.10-compatible offsets", () => {
    expect(isoUtc(new Date("2025-10-06T09:00:00Z"))).toBe(
      "2025-10-06T09:00:00.000+00:00",
    );
  });
});
