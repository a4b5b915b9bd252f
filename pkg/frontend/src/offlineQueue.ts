/** Offline-first upload queue.
 *
 * Committed batches land here and survive until the service has them. Flushes
 * are sequential and re-entrancy guarded; batch ids are idempotency keys, so
 * a reconnect storm (multiple flush attempts racing) still applies each batch
 * exactly once server-side, and a duplicate response ("already applied")
 * counts as success. Storage is pluggable: localStorage in a browser, the
 * in-memory stand-in anywhere else.
 */

import type { ApplyResult } from "./types.js";

export interface QueueStorage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class MemoryStorage implements QueueStorage {
  private store = new Map<string, string>();
  getItem(key: string): string | null {
    return this.store.get(key) ?? null;
  }
  setItem(key: string, value: string): void {
    this.store.set(key, value);
  }
  removeItem(key: string): void {
    this.store.delete(key);
  }
}

export interface FlushResult {
  applied: number;
  alreadyApplied: number;
  /** Batches still queued after a delivery failure stopped the flush. */
  remaining: number;
}

interface QueuedBatch {
  batch_id: string;
  body: string;
}

export class OfflineQueue {
  private flushing = false;

  constructor(
    private readonly storage: QueueStorage = new MemoryStorage(),
    private readonly key = "skilltrack-offline-queue",
  ) {}

  private load(): QueuedBatch[] {
    const raw = this.storage.getItem(this.key);
    if (!raw) return [];
    return JSON.parse(raw) as QueuedBatch[];
  }

  private save(batches: QueuedBatch[]): void {
    if (batches.length === 0) {
      this.storage.removeItem(this.key);
    } else {
      this.storage.setItem(this.key, JSON.stringify(batches));
    }
  }

  /** Queue a committed batch document. Re-enqueueing an id is a no-op. */
  enqueue(batchJson: string): void {
    const doc = JSON.parse(batchJson) as { batch_id?: string };
    if (!doc.batch_id) {
      throw new Error("batch document has no batch_id");
    }
    const queued = this.load();
    if (queued.some((b) => b.batch_id === doc.batch_id)) return;
    queued.push({ batch_id: doc.batch_id, body: batchJson });
    this.save(queued);
  }

  pending(): string[] {
    return this.load().map((b) => b.batch_id);
  }

  /** Deliver queued batches in order until empty or a send fails. */
  async flush(
    post: (body: string) => Promise<ApplyResult>,
  ): Promise<FlushResult> {
    if (this.flushing) {
      return { applied: 0, alreadyApplied: 0, remaining: this.load().length };
    }
    this.flushing = true;
    let applied = 0;
    let alreadyApplied = 0;
    try {
      for (;;) {
        const queued = this.load();
        if (queued.length === 0) break;
        const head = queued[0];
        let result: ApplyResult;
        try {
          result = await post(head.body);
        } catch {
          break; // still offline; keep everything queued
        }
        if (result.applied) applied += 1;
        else alreadyApplied += 1;
        this.save(this.load().filter((b) => b.batch_id !== head.batch_id));
      }
    } finally {
      this.flushing = false;
    }
    return { applied, alreadyApplied, remaining: this.load().length };
  }
}
