/** Dashboard renderers: API payloads in, HTML strings out.
 *
 * Hard rule: no metric is ever computed here. Every number, flag and cell
 * color is read verbatim from one API payload, so a rendered view can be
 * diffed against the response that produced it.
 */

import type {
  BarcodePayload,
  CalibrationPayload,
  ConsistencyPayload,
  CoveragePayload,
  PortfolioPayload,
} from "./types.js";

function esc(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function pct(fraction: number): string {
  return `${(fraction * 100).toFixed(0)}%`;
}

/** Undefined metrics render as a badge, never as 0%. */
export function consistencyBadge(consistency: number | null): string {
  if (consistency === null) {
    return `<span class="badge no-data">no data</span>`;
  }
  return `<span class="consistency">${pct(consistency)}</span>`;
}

export function renderConsistency(payload: ConsistencyPayload): string {
  return (
    `<div class="consistency-card" data-student="${esc(payload.student_id)}">` +
    consistencyBadge(payload.consistency) +
    `<span class="detail">${payload.numerator}/${payload.denominator}` +
    ` sessions at &ge;${payload.threshold}</span></div>`
  );
}

/** Fixed-height strip of cells, chronological, colored by `meets`. */
export function renderBarcode(payload: BarcodePayload): string {
  const cells = payload.cells
    .map(
      (cell) =>
        `<span class="cell ${cell.meets ? "meets" : "fails"}"` +
        ` data-observation="${esc(cell.observation_id)}"` +
        ` data-indicator="${cell.indicator}"` +
        ` title="indicator ${cell.indicator}"></span>`,
    )
    .join("");
  return (
    `<div class="barcode" data-student="${esc(payload.student_id)}"` +
    ` data-threshold="${payload.threshold}">${cells}</div>`
  );
}

/** Detail panel shown when a barcode cell is tapped. */
export function renderCellDetail(
  payload: BarcodePayload,
  observationId: string,
): string {
  const cell = payload.cells.find((c) => c.observation_id === observationId);
  if (!cell) {
    return `<div class="cell-detail missing">observation not in view</div>`;
  }
  const when = new Date(cell.timestamp * 1000).toISOString();
  return (
    `<div class="cell-detail"><dl>` +
    `<dt>observation</dt><dd>${esc(cell.observation_id)}</dd>` +
    `<dt>indicator</dt><dd>${cell.indicator}</dd>` +
    `<dt>meets &ge;${payload.threshold}</dt><dd>${cell.meets}</dd>` +
    `<dt>recorded</dt><dd>${when}</dd>` +
    `</dl></div>`
  );
}

export function renderPortfolio(payload: PortfolioPayload): string {
  const rows = payload.entries
    .map(
      (entry) =>
        `<tr data-procedure="${esc(entry.procedure_id)}">` +
        `<td>${esc(entry.procedure_id)}</td>` +
        `<td class="experience">${entry.experience}</td>` +
        `<td>${consistencyBadge(entry.consistency)}</td>` +
        `<td class="${entry.sufficient ? "sufficient" : "needs-work"}">` +
        `${entry.sufficient ? "sufficient" : "needs more"}</td></tr>`,
    )
    .join("");
  return (
    `<table class="portfolio" data-student="${esc(payload.student_id)}">` +
    `<thead><tr><th>procedure</th><th>experience</th>` +
    `<th>consistency</th><th>status</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderCalibration(payload: CalibrationPayload): string {
  const total = payload.observations;
  const bars = payload.histogram
    .map((count, index) => {
      const width = total > 0 ? Math.round((count / total) * 100) : 0;
      return (
        `<div class="bar" data-indicator="${index + 1}" data-count="${count}">` +
        `<span class="fill" style="width:${width}%"></span>${count}</div>`
      );
    })
    .join("");
  const offset =
    payload.mean_offset === null
      ? `<span class="badge no-data">no cohort</span>`
      : payload.mean_offset.toFixed(2);
  const tv =
    payload.tv_distance === null
      ? `<span class="badge no-data">no cohort</span>`
      : payload.tv_distance.toFixed(3);
  return (
    `<div class="calibration" data-staff="${esc(payload.staff_id)}">` +
    `<div class="histogram">${bars}</div>` +
    `<dl><dt>distinct points used</dt><dd>${payload.distinct_points_used}</dd>` +
    `<dt>mean offset vs cohort</dt><dd>${offset}</dd>` +
    `<dt>distribution distance</dt><dd>${tv}</dd></dl></div>`
  );
}

export function renderCoverage(payload: CoveragePayload): string {
  const rows = payload.rows
    .map(
      (row) =>
        `<tr data-outcome="${esc(row.outcome_id)}">` +
        `<td>${esc(row.outcome_id)}</td>` +
        `<td>${row.wba_items}</td><td>${row.teaching_units}</td>` +
        `<td>${row.questions}</td><td>${row.observations}</td></tr>`,
    )
    .join("");
  return (
    `<table class="coverage"><thead><tr><th>outcome</th><th>WBA items</th>` +
    `<th>teaching</th><th>questions</th><th>observations</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export interface ThresholdTransition {
  observation_id: string;
  from: boolean;
  to: boolean;
}

/** Cell transitions between two barcode fetches (threshold slider moves).
 * Raising the threshold must never produce a fails->meets transition; the
 * dashboards assert this invariant whenever the slider goes up. */
export function thresholdTransitions(
  before: BarcodePayload,
  after: BarcodePayload,
): ThresholdTransition[] {
  const prior = new Map(before.cells.map((c) => [c.observation_id, c.meets]));
  const transitions: ThresholdTransition[] = [];
  for (const cell of after.cells) {
    const was = prior.get(cell.observation_id);
    if (was !== undefined && was !== cell.meets) {
      transitions.push({
        observation_id: cell.observation_id,
        from: was,
        to: cell.meets,
      });
    }
  }
  return transitions;
}
