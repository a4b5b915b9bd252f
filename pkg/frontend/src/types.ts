/** JSON payload shapes of the skilltrack service API, verbatim. */

export interface ConsistencyPayload {
  student_id: string;
  scope: string;
  scope_id: string | null;
  threshold: number;
  numerator: number;
  denominator: number;
  /** null when no applicable session exists; the UI must never show 0%. */
  consistency: number | null;
}

export interface BarcodeCell {
  observation_id: string;
  timestamp: number;
  indicator: number;
  meets: boolean;
}

export interface BarcodePayload {
  student_id: string;
  scope: string;
  scope_id: string | null;
  threshold: number;
  text: string;
  cells: BarcodeCell[];
}

export interface PortfolioEntry {
  procedure_id: string;
  experience: number;
  consistency: number | null;
  sufficient: boolean;
}

export interface PortfolioPayload {
  student_id: string;
  entries: PortfolioEntry[];
}

export interface CalibrationPayload {
  staff_id: string;
  observations: number;
  histogram: number[]; // counts for indicators 1..6
  distinct_points_used: number;
  mean_offset: number | null;
  tv_distance: number | null;
}

export interface CoverageRow {
  outcome_id: string;
  wba_items: number;
  teaching_units: number;
  questions: number;
  observations: number;
  question_attempts: number;
}

export interface CoveragePayload {
  rows: CoverageRow[];
}

export interface SessionSummary {
  id: string;
  location_id: string;
  staff_id: string;
  student_ids: string[];
  opened_at: string;
  closed_at: string | null;
  state: string;
  observation_count: number;
  batch_id: string | null;
}

export interface ApplyResult {
  batch_id: string;
  applied: boolean;
  session_id: string;
  observation_count: number;
}

export interface RegistrySummary {
  outcomes: number;
  procedures: number;
  items: number;
  staff: number;
  students: number;
  locations: number;
  questions: number;
  teaching: number;
}
