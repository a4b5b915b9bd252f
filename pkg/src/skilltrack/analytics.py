"""Consistency metrics, barcodes, portfolios and staff calibration.

All functions are pure and deterministic over an immutable ObservationLog
snapshot; results depend only on timestamps, never on storage order.

The session rule: a session meets the threshold when the MINIMUM in-scope
indicator does, because one weak step compromises the whole job. The rule is
the module constant SESSION_AGGREGATE so experiments can swap it. Sessions
with no in-scope observation are not-applicable and are excluded from both
numerator and denominator; a zero denominator yields an undefined result,
which is reported as such and never coerced to 0.0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .domain import SkillTrackError, validate_indicator
from .mapping import MappingEdge, SourceKind
from .obslog import ObservationLog
from .registry import Registry

DEFAULT_THRESHOLD = 4

# Aggregation of a session's in-scope indicators; meets <=> aggregate >= threshold.
SESSION_AGGREGATE: Callable[[np.ndarray], float] = np.min


class InvalidQuery(SkillTrackError):
    kind = "invalid-query"


class ScopeKind(str, enum.Enum):
    ALL = "all"
    PROCEDURE = "procedure"
    ITEM = "item"
    OUTCOME = "outcome"


@dataclass(frozen=True)
class Scope:
    kind: ScopeKind = ScopeKind.ALL
    id: str | None = None

    def __post_init__(self) -> None:
        if self.kind is not ScopeKind.ALL and not self.id:
            raise InvalidQuery(f"scope {self.kind.value} needs an id")


@dataclass(frozen=True)
class Window:
    """Session filter: an epoch-second range and/or the last N applicable
    sessions (range applies first)."""

    ts_from: int | None = None
    ts_to: int | None = None
    last_n: int | None = None

    def __post_init__(self) -> None:
        if self.last_n is not None and self.last_n < 1:
            raise InvalidQuery("last_n must be >= 1")


@dataclass(frozen=True)
class ConsistencyQuery:
    student_id: str
    scope: Scope = Scope()
    threshold: int = DEFAULT_THRESHOLD
    window: Window | None = None

    def __post_init__(self) -> None:
        validate_indicator(self.threshold)


class MeetsResult(str, enum.Enum):
    MEETS = "meets"
    FAILS = "fails"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class ConsistencyResult:
    numerator: int
    denominator: int

    @property
    def fraction(self) -> float | None:
        """Fraction of applicable sessions meeting the threshold; None (not
        0.0) when no session was applicable."""
        if self.denominator == 0:
            return None
        return self.numerator / self.denominator


# -- scope handling --------------------------------------------------------------

def _scope_mask(
    log: ObservationLog,
    student_id: str,
    scope: Scope,
    edges: Iterable[MappingEdge] | None,
) -> np.ndarray:
    student_code = log.code_of("student", student_id)
    if student_code is None:
        return np.zeros(len(log), dtype=bool)
    mask = log.student == student_code
    if scope.kind is ScopeKind.PROCEDURE:
        code = log.code_of("procedure", scope.id)
        mask &= (log.procedure == code) if code is not None else False
    elif scope.kind is ScopeKind.ITEM:
        code = log.code_of("item", scope.id)
        mask &= (log.item == code) if code is not None else False
    elif scope.kind is ScopeKind.OUTCOME:
        if edges is None:
            raise InvalidQuery("outcome scope requires mapping edges")
        mapped = {
            e.source_id
            for e in edges
            if e.source_kind is SourceKind.WORKFLOW_ITEM
            and e.outcome_id == scope.id
        }
        codes = [
            c for c in (log.code_of("item", i) for i in mapped) if c is not None
        ]
        mask &= np.isin(log.item, codes) if codes else False
    return mask


def _session_aggregates(
    log: ObservationLog, mask: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(session codes, aggregated indicator) for sessions with in-scope rows,
    ordered by (opened_at, session id)."""
    codes = log.session[mask]
    if not len(codes):
        return np.zeros(0, dtype=np.int32), np.zeros(0)
    indicators = log.indicator[mask]
    present = np.unique(codes)
    if SESSION_AGGREGATE is np.min:
        mins = np.full(log.n_sessions, np.iinfo(np.int8).max, dtype=np.int8)
        np.minimum.at(mins, codes, indicators)
        agg = mins[present].astype(float)
    else:
        agg = np.asarray(
            [SESSION_AGGREGATE(indicators[codes == c]) for c in present],
            dtype=float,
        )
    order = np.lexsort(
        (
            np.asarray([log.sessions[c].id for c in present]),
            log.session_opened_at[present],
        )
    )
    return present[order], agg[order]


def _apply_window(
    log: ObservationLog,
    session_codes: np.ndarray,
    agg: np.ndarray,
    window: Window | None,
) -> tuple[np.ndarray, np.ndarray]:
    if window is None:
        return session_codes, agg
    keep = np.ones(len(session_codes), dtype=bool)
    opened = log.session_opened_at[session_codes]
    if window.ts_from is not None:
        keep &= opened >= window.ts_from
    if window.ts_to is not None:
        keep &= opened <= window.ts_to
    session_codes, agg = session_codes[keep], agg[keep]
    if window.last_n is not None:
        session_codes = session_codes[-window.last_n:]
        agg = agg[-window.last_n:]
    return session_codes, agg


# -- operations ------------------------------------------------------------------

def session_meets(
    log: ObservationLog,
    session_id: str,
    student_id: str,
    scope: Scope = Scope(),
    threshold: int = DEFAULT_THRESHOLD,
    edges: Iterable[MappingEdge] | None = None,
) -> MeetsResult:
    """Tri-state judgment of one session for one student."""
    validate_indicator(threshold)
    session_code = next(
        (i for i, s in enumerate(log.sessions) if s.id == session_id), None
    )
    if session_code is None:
        return MeetsResult.NOT_APPLICABLE
    mask = _scope_mask(log, student_id, scope, edges)
    mask &= log.session == session_code
    if not mask.any():
        return MeetsResult.NOT_APPLICABLE
    value = SESSION_AGGREGATE(log.indicator[mask])
    return MeetsResult.MEETS if value >= threshold else MeetsResult.FAILS


def sessional_consistency(
    log: ObservationLog,
    query: ConsistencyQuery,
    edges: Iterable[MappingEdge] | None = None,
) -> ConsistencyResult:
    """Fraction of the student's applicable sessions meeting the threshold."""
    mask = _scope_mask(log, query.student_id, query.scope, edges)
    codes, agg = _session_aggregates(log, mask)
    codes, agg = _apply_window(log, codes, agg, query.window)
    denominator = len(codes)
    numerator = int((agg >= query.threshold).sum()) if denominator else 0
    return ConsistencyResult(numerator=numerator, denominator=denominator)


@dataclass(frozen=True)
class BarcodeCell:
    observation_id: str
    ts: int
    indicator: int
    meets: bool


@dataclass(frozen=True)
class Barcode:
    threshold: int
    cells: tuple[BarcodeCell, ...]

    def text(self) -> str:
        """One character per cell, chronological: '#' meets, '.' fails."""
        return "".join("#" if c.meets else "." for c in self.cells)


def barcode(
    log: ObservationLog,
    query: ConsistencyQuery,
    edges: Iterable[MappingEdge] | None = None,
) -> Barcode:
    """Chronological strip of in-scope observations against the threshold.

    Cells sort by (timestamp, observation id); raising the threshold can only
    turn meets-cells into fails-cells.
    """
    mask = _scope_mask(log, query.student_id, query.scope, edges)
    if query.window is not None:
        codes, agg = _session_aggregates(log, mask)
        codes, _ = _apply_window(log, codes, agg, query.window)
        mask &= np.isin(log.session, codes)
    rows = np.flatnonzero(mask)
    ids = log.obs_ids()[rows]
    order = np.lexsort((ids, log.ts[rows]))
    rows, ids = rows[order], ids[order]
    cells = tuple(
        BarcodeCell(
            observation_id=str(ids[k]),
            ts=int(log.ts[r]),
            indicator=int(log.indicator[r]),
            meets=bool(log.indicator[r] >= query.threshold),
        )
        for k, r in enumerate(rows)
    )
    return Barcode(threshold=query.threshold, cells=cells)


# -- portfolio -------------------------------------------------------------------

@dataclass(frozen=True)
class PortfolioConfig:
    # Defaults are configuration, not sourced values: tune per program.
    min_experience: int = 5
    sufficiency_threshold: float = 0.8
    indicator_threshold: int = DEFAULT_THRESHOLD

    def __post_init__(self) -> None:
        validate_indicator(self.indicator_threshold)
        if self.min_experience < 0:
            raise InvalidQuery("min_experience must be non-negative")
        if not (0.0 <= self.sufficiency_threshold <= 1.0):
            raise InvalidQuery("sufficiency_threshold must be in [0, 1]")


@dataclass(frozen=True)
class PortfolioEntry:
    procedure_id: str
    experience: int  # applicable sessions on this procedure
    consistency: float | None
    sufficient: bool


def portfolio(
    log: ObservationLog,
    registry: Registry,
    student_id: str,
    config: PortfolioConfig = PortfolioConfig(),
) -> tuple[PortfolioEntry, ...]:
    """Per-procedure experience/consistency/sufficiency for one student.

    Every registry procedure gets an entry; unattempted ones show zero
    experience, undefined consistency and sufficient=False.
    """
    entries = []
    for proc_id in sorted(registry.procedures):
        result = sessional_consistency(
            log,
            ConsistencyQuery(
                student_id=student_id,
                scope=Scope(kind=ScopeKind.PROCEDURE, id=proc_id),
                threshold=config.indicator_threshold,
            ),
        )
        fraction = result.fraction
        sufficient = (
            result.denominator >= config.min_experience
            and fraction is not None
            and fraction >= config.sufficiency_threshold
        )
        entries.append(
            PortfolioEntry(
                procedure_id=proc_id,
                experience=result.denominator,
                consistency=fraction,
                sufficient=sufficient,
            )
        )
    return tuple(entries)


# -- staff calibration -------------------------------------------------------------

@dataclass(frozen=True)
class StaffCalibration:
    staff_id: str
    observation_count: int
    histogram: tuple[int, ...]  # counts for indicators 1..6
    distinct_points_used: int
    mean_offset: float | None  # vs leave-one-out cohort on shared items
    tv_distance: float | None  # total variation vs leave-one-out distribution


@dataclass(frozen=True)
class CalibrationReport:
    staff: tuple[StaffCalibration, ...]


def calibration_report(log: ObservationLog) -> CalibrationReport:
    """Per-staff indicator usage and deviation from the rest of the cohort.

    The mean offset compares a staff member's scores with the leave-one-out
    cohort mean on the workflow items they share with at least one other
    observer, weighting each shared item by the member's own observation count
    there (controls for different item mixes). With no cohort to compare to,
    offset and distance are undefined but the histogram is still emitted.
    """
    n_staff = len(log.staff)
    n_items = len(log.items)
    entries: list[StaffCalibration] = []
    if n_staff == 0:
        return CalibrationReport(staff=())

    hist = np.zeros((n_staff, 7), dtype=np.int64)
    np.add.at(hist, (log.staff_member, log.indicator.astype(np.int64)), 1)
    hist = hist[:, 1:]  # indicators 1..6

    counts = np.zeros((n_items, n_staff), dtype=np.int64)
    sums = np.zeros((n_items, n_staff), dtype=np.float64)
    np.add.at(counts, (log.item, log.staff_member), 1)
    np.add.at(sums, (log.item, log.staff_member), log.indicator.astype(np.float64))
    total_counts = counts.sum(axis=1)
    total_sums = sums.sum(axis=1)
    total_hist = hist.sum(axis=0)

    order = np.argsort(np.asarray(log.staff))
    for s in order:
        own_hist = hist[s]
        n_own = int(own_hist.sum())
        own_cnt = counts[:, s]
        other_cnt = total_counts - own_cnt
        shared = (own_cnt > 0) & (other_cnt > 0)
        if shared.any():
            own_mean = sums[shared, s] / own_cnt[shared]
            loo_mean = (total_sums[shared] - sums[shared, s]) / other_cnt[shared]
            weights = own_cnt[shared]
            offset = float(np.sum(weights * (own_mean - loo_mean)) / weights.sum())
        else:
            offset = None
        others_hist = total_hist - own_hist
        if n_own > 0 and others_hist.sum() > 0:
            p = own_hist / n_own
            q = others_hist / others_hist.sum()
            tv = float(0.5 * np.abs(p - q).sum())
        else:
            tv = None
        entries.append(
            StaffCalibration(
                staff_id=log.staff[s],
                observation_count=n_own,
                histogram=tuple(int(c) for c in own_hist),
                distinct_points_used=int((own_hist > 0).sum()),
                mean_offset=offset,
                tv_distance=tv,
            )
        )
    return CalibrationReport(staff=tuple(entries))


# -- delimiter-separated exports ----------------------------------------------------

def _fmt(x: float | None) -> str:
    return "NA" if x is None else f"{x:.6f}"


def consistency_table(
    queries_and_results: Sequence[tuple[ConsistencyQuery, ConsistencyResult]],
) -> str:
    lines = [
        "student_id\tscope\tscope_id\tthreshold\tnumerator\tdenominator\tconsistency"
    ]
    for q, r in queries_and_results:
        lines.append(
            f"{q.student_id}\t{q.scope.kind.value}\t{q.scope.id or ''}"
            f"\t{q.threshold}\t{r.numerator}\t{r.denominator}\t{_fmt(r.fraction)}"
        )
    return "\n".join(lines) + "\n"


def calibration_table(report: CalibrationReport) -> str:
    lines = [
        "staff_id\tobservations\tind_1\tind_2\tind_3\tind_4\tind_5\tind_6"
        "\tdistinct_points\tmean_offset\ttv_distance"
    ]
    for s in report.staff:
        cells = "\t".join(str(c) for c in s.histogram)
        lines.append(
            f"{s.staff_id}\t{s.observation_count}\t{cells}"
            f"\t{s.distinct_points_used}\t{_fmt(s.mean_offset)}\t{_fmt(s.tv_distance)}"
        )
    return "\n".join(lines) + "\n"


def portfolio_table(student_id: str, entries: Sequence[PortfolioEntry]) -> str:
    lines = ["student_id\tprocedure_id\texperience\tconsistency\tsufficient"]
    for e in entries:
        lines.append(
            f"{student_id}\t{e.procedure_id}\t{e.experience}"
            f"\t{_fmt(e.consistency)}\t{str(e.sufficient).lower()}"
        )
    return "\n".join(lines) + "\n"
