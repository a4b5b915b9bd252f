/** Typed client for the skilltrack service. Thin by design: every number the
 * UI shows comes out of one of these responses, never from local math. */

import type {
  ApplyResult,
  BarcodePayload,
  CalibrationPayload,
  ConsistencyPayload,
  CoveragePayload,
  PortfolioPayload,
  RegistrySummary,
  SessionSummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    detail: string,
  ) {
    super(`${kind}: ${detail}`);
  }
}

export interface ConsistencyParams {
  scope?: string;
  scope_id?: string;
  threshold?: number;
  last_n?: number;
  from?: number;
  to?: number;
}

type Fetch = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: Fetch = fetch,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: string,
  ): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      body,
    });
    const text = await response.text();
    let doc: unknown;
    try {
      doc = JSON.parse(text);
    } catch {
      throw new ApiError(response.status, "bad-response", text.slice(0, 200));
    }
    if (!response.ok) {
      const err = doc as { error?: string; detail?: string };
      throw new ApiError(
        response.status,
        err.error ?? "error",
        err.detail ?? text,
      );
    }
    return doc as T;
  }

  private query(params: Record<string, string | number | undefined>): string {
    const parts = Object.entries(params)
      .filter(([, v]) => v !== undefined)
      .map(([k, v]) => `${encodeURIComponent(k)}=${encodeURIComponent(String(v))}`);
    return parts.length ? `?${parts.join("&")}` : "";
  }

  loadRegistry(document: string): Promise<RegistrySummary> {
    return this.request("POST", "/registry", document);
  }

  sync(batchJson: string): Promise<ApplyResult> {
    return this.request("POST", "/sync", batchJson);
  }

  consistency(
    studentId: string,
    params: ConsistencyParams = {},
  ): Promise<ConsistencyPayload> {
    return this.request(
      "GET",
      `/students/${studentId}/consistency${this.query({ ...params })}`,
    );
  }

  barcode(
    studentId: string,
    params: ConsistencyParams = {},
  ): Promise<BarcodePayload> {
    return this.request(
      "GET",
      `/students/${studentId}/barcode${this.query({ ...params })}`,
    );
  }

  portfolio(
    studentId: string,
    params: {
      min_experience?: number;
      sufficiency_threshold?: number;
      threshold?: number;
    } = {},
  ): Promise<PortfolioPayload> {
    return this.request(
      "GET",
      `/students/${studentId}/portfolio${this.query({ ...params })}`,
    );
  }

  calibration(staffId: string): Promise<CalibrationPayload> {
    return this.request("GET", `/staff/${staffId}/calibration`);
  }

  coverage(): Promise<CoveragePayload> {
    return this.request("GET", "/coverage");
  }

  sessions(): Promise<{ sessions: SessionSummary[] }> {
    return this.request("GET", "/sessions");
  }

  session(id: string): Promise<SessionSummary & { observations: unknown[] }> {
    return this.request("GET", `/sessions/${id}`);
  }
}
