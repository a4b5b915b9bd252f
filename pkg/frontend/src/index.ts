export { ApiClient, ApiError } from "./api.js";
export type { ConsistencyParams } from "./api.js";
export {
  EntryError,
  EntrySession,
  isoUtc,
} from "./entryGrid.js";
export type {
  GridCell,
  ObservationDraft,
  ProcedureRef,
  SessionStart,
  WorkflowItemRef,
} from "./entryGrid.js";
export { MemoryStorage, OfflineQueue } from "./offlineQueue.js";
export type { FlushResult, QueueStorage } from "./offlineQueue.js";
export {
  consistencyBadge,
  renderBarcode,
  renderCalibration,
  renderCellDetail,
  renderConsistency,
  renderCoverage,
  renderPortfolio,
  thresholdTransitions,
} from "./views.js";
export type * from "./types.js";
