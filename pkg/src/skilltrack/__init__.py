"""Workplace-based assessment platform.

Maps observations and exam questions to learning outcomes, captures sparse
1..6-scale observations through an offline-capable batch protocol, and fuses
the log into consistency metrics, barcodes, portfolios, staff calibration,
blueprint-verified exams and patient-slot allocation plans.
"""

from .analytics import (
    Barcode,
    CalibrationReport,
    ConsistencyQuery,
    ConsistencyResult,
    MeetsResult,
    PortfolioConfig,
    PortfolioEntry,
    Scope,
    ScopeKind,
    Window,
    barcode,
    calibration_report,
    portfolio,
    session_meets,
    sessional_consistency,
)
from .capture import (
    CaptureBatch,
    SyncStore,
    batch_from_json,
    batch_to_json,
    batches_from_log,
    open_session,
    record,
    staff_signout,
    student_signout,
    sync,
)
from .domain import (
    INDICATOR_LABELS,
    Authority,
    ExamQuestion,
    LearningOutcome,
    Location,
    Observation,
    Procedure,
    Session,
    SessionState,
    SkillTrackError,
    StaffMember,
    Student,
    StudentLockState,
    TeachingUnit,
    WorkflowItem,
    validate_indicator,
    validate_observation,
)
from .mapping import (
    BlueprintConstraint,
    CoverageFilter,
    CoverageReport,
    MappingEdge,
    SourceKind,
    coverage_report,
    edges_from_registry,
    generate_exam,
    question_performance,
    record_question_result,
    verify_blueprint,
)
from .obslog import ObservationLog
from .registry import Registry, registry_load, serialize
from .scheduling import (
    AllocationPlan,
    PatientSlot,
    PlanConfig,
    SkillSnapshot,
    plan,
    priority_score,
)
from .synth import CohortConfig, generate, inject_anomaly

__version__ = "0.1.0"

__all__ = [
    "Authority",
    "AllocationPlan",
    "Barcode",
    "BlueprintConstraint",
    "CalibrationReport",
    "CaptureBatch",
    "CohortConfig",
    "ConsistencyQuery",
    "ConsistencyResult",
    "CoverageFilter",
    "CoverageReport",
    "ExamQuestion",
    "INDICATOR_LABELS",
    "LearningOutcome",
    "Location",
    "MappingEdge",
    "MeetsResult",
    "Observation",
    "ObservationLog",
    "PatientSlot",
    "PlanConfig",
    "PortfolioConfig",
    "PortfolioEntry",
    "Procedure",
    "Registry",
    "Scope",
    "ScopeKind",
    "Session",
    "SessionState",
    "SkillSnapshot",
    "SkillTrackError",
    "SourceKind",
    "StaffMember",
    "Student",
    "StudentLockState",
    "SyncStore",
    "TeachingUnit",
    "Window",
    "WorkflowItem",
    "barcode",
    "batch_from_json",
    "batch_to_json",
    "batches_from_log",
    "calibration_report",
    "coverage_report",
    "edges_from_registry",
    "generate",
    "generate_exam",
    "inject_anomaly",
    "open_session",
    "plan",
    "portfolio",
    "priority_score",
    "question_performance",
    "record",
    "record_question_result",
    "registry_load",
    "serialize",
    "session_meets",
    "sessional_consistency",
    "staff_signout",
    "student_signout",
    "sync",
    "validate_indicator",
    "validate_observation",
    "verify_blueprint",
]
