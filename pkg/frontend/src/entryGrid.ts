/** Client-side observation entry: the tablet app analog.
 *
 * One EntrySession mirrors the server's session lifecycle: record taps for
 * any student in attendance, sign students out one by one (each sign-out
 * freezes that student's feedback and locks their cells read-only), then the
 * staff sign-out commits the session and produces the upload batch in the
 * documented wire format. The server re-validates everything; this model
 * exists so the UI can refuse illegal input immediately, offline.
 */

export interface WorkflowItemRef {
  id: string;
  label: string;
}

export interface ProcedureRef {
  id: string;
  label: string;
  workflow: WorkflowItemRef[];
}

export interface ObservationDraft {
  id: string;
  student_id: string;
  workflow_item_id: string;
  procedure_id: string;
  indicator: number;
  timestamp: string; // ISO UTC with +00:00 offset
  comment: string | null;
}

export interface GridCell {
  item: WorkflowItemRef;
  /** Latest indicator tapped for this (student, item), if any. */
  indicator: number | null;
  /** Observation drafts not yet uploaded. */
  dirty: boolean;
  /** Locked cells render read-only. */
  locked: boolean;
}

export interface FeedbackView {
  student_id: string;
  signed_out_at: string;
  items: {
    observation_id: string;
    workflow_item_id: string;
    indicator: number;
    comment: string | null;
  }[];
}

export class EntryError extends Error {}

/** Python <= 3.10 rejects the trailing Z, so always emit +00:00. */
export function isoUtc(date: Date): string {
  return date.toISOString().replace("Z", "+00:00");
}

function freshId(prefix: string): string {
  const rand =
    globalThis.crypto?.randomUUID?.() ??
    `${Date.now().toString(16)}-${Math.random().toString(16).slice(2)}`;
  return `${prefix}-${rand}`;
}

export interface SessionStart {
  locationId: string;
  staffId: string;
  studentIds: string[];
  procedures: ProcedureRef[];
  openedAt: Date;
  sessionId?: string;
  clientId?: string;
}

export class EntrySession {
  readonly id: string;
  readonly locationId: string;
  readonly staffId: string;
  readonly clientId: string;
  readonly studentIds: string[];
  readonly openedAt: Date;
  readonly procedures: Map<string, ProcedureRef>;
  readonly observations: ObservationDraft[] = [];
  private readonly locks = new Map<string, "open" | "student_signed_out">();
  private readonly feedback = new Map<string, FeedbackView>();
  private syncedCount = 0;
  state: "active" | "committed" = "active";
  selectedStudent: string;

  constructor(start: SessionStart) {
    if (start.studentIds.length === 0) {
      throw new EntryError("a session needs at least one student");
    }
    this.id = start.sessionId ?? freshId("sess");
    this.locationId = start.locationId;
    this.staffId = start.staffId;
    this.clientId = start.clientId ?? "web";
    this.studentIds = [...start.studentIds].sort();
    this.openedAt = start.openedAt;
    this.procedures = new Map(start.procedures.map((p) => [p.id, p]));
    for (const student of this.studentIds) this.locks.set(student, "open");
    this.selectedStudent = this.studentIds[0];
  }

  isLocked(studentId: string): boolean {
    return this.locks.get(studentId) === "student_signed_out";
  }

  /** Rapid switching between students is a first-class gesture. */
  selectStudent(studentId: string): void {
    if (!this.locks.has(studentId)) {
      throw new EntryError(`${studentId} is not in attendance`);
    }
    this.selectedStudent = studentId;
  }

  /** Tap an item, pick an indicator: appends one observation draft. */
  recordTap(
    studentId: string,
    procedureId: string,
    itemId: string,
    indicator: number,
    at: Date,
    comment: string | null = null,
  ): ObservationDraft {
    if (this.state !== "active") {
      throw new EntryError("session already committed");
    }
    if (!this.locks.has(studentId)) {
      throw new EntryError(`${studentId} is not in attendance`);
    }
    if (this.isLocked(studentId)) {
      throw new EntryError(`${studentId} has signed out; record is locked`);
    }
    const procedure = this.procedures.get(procedureId);
    if (!procedure) {
      throw new EntryError(`procedure ${procedureId} not offered here`);
    }
    if (!procedure.workflow.some((item) => item.id === itemId)) {
      throw new EntryError(`item ${itemId} not in workflow of ${procedureId}`);
    }
    if (!Number.isInteger(indicator) || indicator < 1 || indicator > 6) {
      throw new EntryError(`indicator must be 1..6, got ${indicator}`);
    }
    const draft: ObservationDraft = {
      id: freshId("ob"),
      student_id: studentId,
      workflow_item_id: itemId,
      procedure_id: procedureId,
      indicator,
      timestamp: isoUtc(at),
      comment,
    };
    this.observations.push(draft);
    return draft;
  }

  /** The grid for one student and procedure: workflow order, latest value. */
  grid(studentId: string, procedureId: string): GridCell[] {
    const procedure = this.procedures.get(procedureId);
    if (!procedure) {
      throw new EntryError(`procedure ${procedureId} not offered here`);
    }
    const locked = this.isLocked(studentId);
    return procedure.workflow.map((item) => {
      let indicator: number | null = null;
      let dirty = false;
      this.observations.forEach((draft, n) => {
        if (
          draft.student_id === studentId &&
          draft.workflow_item_id === item.id
        ) {
          indicator = draft.indicator;
          dirty = n >= this.syncedCount;
        }
      });
      return { item, indicator, dirty, locked };
    });
  }

  /** Sign a student out: feedback freezes and their cells lock. */
  signOutStudent(studentId: string, at: Date): FeedbackView {
    if (this.state !== "active") {
      throw new EntryError("session already committed");
    }
    if (!this.locks.has(studentId)) {
      throw new EntryError(`${studentId} is not in attendance`);
    }
    if (this.isLocked(studentId)) {
      throw new EntryError(`${studentId} already signed out`);
    }
    const view: FeedbackView = {
      student_id: studentId,
      signed_out_at: isoUtc(at),
      items: this.observations
        .filter((o) => o.student_id === studentId)
        .map((o) => ({
          observation_id: o.id,
          workflow_item_id: o.workflow_item_id,
          indicator: o.indicator,
          comment: o.comment,
        })),
    };
    this.feedback.set(studentId, view);
    this.locks.set(studentId, "student_signed_out");
    return view;
  }

  /** The frozen feedback a student confirms at sign-out. */
  feedbackFor(studentId: string): FeedbackView | undefined {
    return this.feedback.get(studentId);
  }

  get openStudents(): string[] {
    return this.studentIds.filter((s) => !this.isLocked(s));
  }

  /** Staff sign-out commits and emits the batch document for /sync. */
  signOutStaff(at: Date, batchId?: string): string {
    if (this.state !== "active") {
      throw new EntryError("session already committed");
    }
    const open = this.openStudents;
    if (open.length > 0) {
      throw new EntryError(`students still open: ${open.join(", ")}`);
    }
    this.state = "committed";
    const batch = {
      batch_id: batchId ?? freshId("batch"),
      client_id: this.clientId,
      session: {
        id: this.id,
        location_id: this.locationId,
        staff_id: this.staffId,
        student_ids: this.studentIds,
        opened_at: isoUtc(this.openedAt),
        closed_at: isoUtc(at),
        state: "committed",
      },
      observations: this.observations.map((o) => ({
        id: o.id,
        student_id: o.student_id,
        staff_id: this.staffId,
        workflow_item_id: o.workflow_item_id,
        procedure_id: o.procedure_id,
        indicator: o.indicator,
        timestamp: o.timestamp,
        comment: o.comment,
      })),
      feedback: [...this.feedback.values()].map((f) => ({
        student_id: f.student_id,
        signed_out_at: f.signed_out_at,
        items: f.items,
      })),
    };
    return JSON.stringify(batch);
  }

  markSynced(): void {
    this.syncedCount = this.observations.length;
  }
}
