/** End-to-end round trip against a real `skilltrack serve` instance.
 *
 * Covers the release criterion for the web client: a scripted full session
 * (18 observations, student sign-outs, staff sign-out) lands as exactly one
 * committed session server-side even through an offline queue and a
 * reconnect storm; barcode and portfolio renders match the API payloads
 * cell-for-cell; and raising the threshold slider never turns a fail cell
 * into a meet cell.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { EntrySession } from "../src/entryGrid.js";
import type { ProcedureRef } from "../src/entryGrid.js";
import { OfflineQueue } from "../src/offlineQueue.js";
import {
  renderBarcode,
  renderPortfolio,
  thresholdTransitions,
} from "../src/views.js";

const DOCUMENT = `
outcomes:
  - {id: oA, label: Assessment}
  - {id: oB, label: Treatment}
items:
  - {id: w1, label: History, outcome_ids: [oA]}
  - {id: w2, label: Examination, outcome_ids: [oA]}
  - {id: w3, label: Diagnosis, outcome_ids: [oA, oB]}
  - {id: w4, label: Local anaesthesia, outcome_ids: [oB]}
  - {id: w5, label: Cavity preparation, outcome_ids: [oB]}
  - {id: w6, label: Restoration, outcome_ids: [oB]}
procedures:
  - {id: filling, label: Filling, workflow: [w1, w2, w3, w4, w5, w6]}
staff:
  - {id: st1, name: Dr Example}
students:
  - {id: amy, cohort: "2025", enrollment_date: 2025-09-01}
  - {id: ben, cohort: "2025", enrollment_date: 2025-09-01}
locations:
  - {id: clinic, name: Teaching clinic, available_procedures: [filling]}
`;

const FILLING: ProcedureRef = {
  id: "filling",
  label: "Filling",
  workflow: [
    { id: "w1", label: "History" },
    { id: "w2", label: "Examination" },
    { id: "w3", label: "Diagnosis" },
    { id: "w4", label: "Local anaesthesia" },
    { id: "w5", label: "Cavity preparation" },
    { id: "w6", label: "Restoration" },
  ],
};

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

let service: ChildProcess;
let api: ApiClient;
let base: string;

beforeAll(async () => {
  const port = await freePort();
  const dataDir = mkdtempSync(join(tmpdir(), "skilltrack-ui-"));
  service = spawn(
    "python3",
    ["-m", "skilltrack.cli", "serve", "--data-dir", dataDir,
     "--port", String(port)],
    { stdio: "ignore" },
  );
  base = `http://127.0.0.1:${port}`;
  api = new ApiClient(base);
  for (let attempt = 0; ; attempt += 1) {
    try {
      await api.sessions();
      break;
    } catch {
      if (attempt > 100) throw new Error("service did not come up");
      await new Promise((resolve) => setTimeout(resolve, 100));
    }
  }
  await api.loadRegistry(DOCUMENT);
}, 30_000);

afterAll(() => {
  service?.kill();
});

const minute = (n: number) => new Date(Date.UTC(2025, 9, 6, 9, n));

describe("UI round trip", () => {
  it("delivers a full scripted session exactly once through the offline queue",
    async () => {
      const session = new EntrySession({
        locationId: "clinic",
        staffId: "st1",
        studentIds: ["amy", "ben"],
        procedures: [FILLING],
        openedAt: minute(0),
        sessionId: "ui-session-1",
        clientId: "web-test",
      });

      // 18 observations for amy across the workflow, mixed quality so the
      // barcode has both cell kinds; a couple for ben too.
      const levels = [4, 5, 3, 6, 4, 2, 5, 5, 4, 6, 3, 4, 5, 6, 4, 5, 2, 6];
      levels.forEach((level, n) => {
        session.recordTap(
          "amy", "filling", FILLING.workflow[n % 6].id, level, minute(n + 1),
        );
      });
      session.recordTap("ben", "filling", "w1", 4, minute(20));
      session.recordTap("ben", "filling", "w2", 5, minute(21));
      expect(session.observations).toHaveLength(20);

      session.signOutStudent("amy", minute(50));
      session.signOutStudent("ben", minute(51));
      const batchJson = session.signOutStaff(minute(55), "ui-batch-1");

      // Offline first: delivery fails, the batch stays queued.
      const queue = new OfflineQueue();
      queue.enqueue(batchJson);
      const offline = await queue.flush(async () => {
        throw new Error("no wifi in the clinic");
      });
      expect(offline.remaining).toBe(1);

      // Reconnect storm: several flushes race; exactly one delivery happens.
      const post = (body: string) => api.sync(body);
      const results = await Promise.all([
        queue.flush(post),
        queue.flush(post),
        queue.flush(post),
      ]);
      expect(results.reduce((s, r) => s + r.applied, 0)).toBe(1);
      expect(queue.pending()).toEqual([]);

      // Belt and braces: re-enqueue and re-flush the same batch (client
      // restart after upload); the server reports it as already applied.
      queue.enqueue(batchJson);
      const replay = await queue.flush(post);
      expect(replay.applied).toBe(0);
      expect(replay.alreadyApplied).toBe(1);

      const { sessions } = await api.sessions();
      expect(sessions).toHaveLength(1);
      expect(sessions[0].id).toBe("ui-session-1");
      expect(sessions[0].state).toBe("committed");
      expect(sessions[0].observation_count).toBe(20);
    }, 30_000);

  it("renders barcode and portfolio exactly from the API payloads", async () => {
    const payload = await api.barcode("amy");
    const html = renderBarcode(payload);
    const rendered = [...html.matchAll(
      /data-observation="([^"]+)"[^>]*data-indicator="(\d)"/g,
    )].map((m) => ({ id: m[1], indicator: Number(m[2]) }));
    expect(rendered.map((c) => c.id)).toEqual(
      payload.cells.map((c) => c.observation_id),
    );
    expect(rendered.map((c) => c.indicator)).toEqual(
      payload.cells.map((c) => c.indicator),
    );
    const meetsClasses = [...html.matchAll(/class="cell (\w+)"/g)].map(
      (m) => m[1] === "meets",
    );
    expect(meetsClasses).toEqual(payload.cells.map((c) => c.meets));
    expect(payload.cells.some((c) => c.meets)).toBe(true);
    expect(payload.cells.some((c) => !c.meets)).toBe(true);

    const portfolio = await api.portfolio("amy");
    const table = renderPortfolio(portfolio);
    for (const entry of portfolio.entries) {
      expect(table).toContain(`data-procedure="${entry.procedure_id}"`);
      expect(table).toContain(`class="experience">${entry.experience}<`);
    }
    // ben has observations but amy's portfolio shows only amy's numbers.
    expect(portfolio.student_id).toBe("amy");
  }, 30_000);

  it("threshold slider never turns a fail cell into a meet cell", async () => {
    let previous = await api.barcode("amy", { threshold: 1 });
    for (let threshold = 2; threshold <= 6; threshold += 1) {
      const next = await api.barcode("amy", { threshold });
      const transitions = thresholdTransitions(previous, next);
      const regressions = transitions.filter((t) => !t.from && t.to);
      expect(regressions).toEqual([]);
      previous = next;
    }
    // At threshold 1 everything meets; the strip can only lose cells after.
    const lowest = await api.barcode("amy", { threshold: 1 });
    expect(lowest.cells.every((c) => c.meets)).toBe(true);
  }, 30_000);

  it("undefined consistency arrives as null and renders as no data", async () => {
    const fresh = await api.consistency("ben", {
      scope: "procedure",
      scope_id: "filling",
      threshold: 6,
      last_n: 1,
    });
    expect(fresh.denominator).toBeGreaterThanOrEqual(0);
    const untouched = await api.consistency("amy", {
      scope: "item",
      scope_id: "w6",
      threshold: 6,
      from: 9_999_999_999,
    });
    expect(untouched.denominator).toBe(0);
    expect(untouched.consistency).toBeNull();
  }, 30_000);
});
