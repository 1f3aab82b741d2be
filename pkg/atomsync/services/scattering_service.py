"""
Standing Wave Sync - Scattering Service

Exit-time experiments: atoms launched at ξ = 0 between two detectors, scans
of the exit time over n or δ, adaptive refinement of intervals where the
exit time varies violently, and the fractal/smooth verdict built on it.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from atomsync.models import ReducedState, SystemParams
from atomsync.services.integrator_service import (
    EventKind,
    EventSpec,
    IntegratorConfig,
    SystemKind,
    integrate,
)
from atomsync.services.sweep_service import sweep_orchestrator

logger = structlog.get_logger(__name__)

DEFAULT_THRESHOLD_FACTOR = 5.0
DEFAULT_MAX_FLAGGED = 32


class OutcomeKind(str, Enum):
    EXIT = "exit"
    TIMEOUT = "timeout"
    FAILED = "failed"


class ScanAxis(str, Enum):
    PHOTON_NUMBER = "n"
    DETUNING = "delta"


class Verdict(str, Enum):
    FRACTAL = "fractal"
    SMOOTH = "smooth"
    INCONCLUSIVE = "inconclusive"


class ExitExperiment(BaseModel):
    """Detectors at ξ = ±π·detector_span around the launch point ξ = 0."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    prm: SystemParams = Field(default_factory=SystemParams)
    detector_span: float = Field(
        default=2.0, gt=0, description="Detector separation in wavelengths; each sits span/2 wavelengths from the start",
    )
    p0: float = Field(default=50.0)
    z0: float = Field(default=-1.0, ge=-1.0, le=1.0)
    tau_max: float = Field(default=1e5, gt=0)

    @property
    def detectors(self) -> Tuple[float, float]:
        edge = math.pi * self.detector_span
        return -edge, edge

    def initial_state(self) -> ReducedState:
        return ReducedState(xi=0.0, p=self.p0, u=0.0, v=0.0, z=self.z0)

    def along(self, axis: ScanAxis, value: float) -> "ExitExperiment":
        return self.model_copy(update={"prm": self.prm.with_updates(**{axis.value: value})})


@dataclass(frozen=True)
class ExitOutcome:
    kind: OutcomeKind
    T: Optional[float] = None
    detector: Optional[float] = None
    error: Optional[str] = None

    @classmethod
    def exit(cls, T: float, detector: Optional[float] = None) -> "ExitOutcome":
        return cls(kind=OutcomeKind.EXIT, T=T, detector=detector)

    @classmethod
    def timeout(cls) -> "ExitOutcome":
        return cls(kind=OutcomeKind.TIMEOUT)

    @classmethod
    def failed(cls, error: str) -> "ExitOutcome":
        return cls(kind=OutcomeKind.FAILED, error=error)

    @property
    def finite(self) -> bool:
        return self.kind is OutcomeKind.EXIT


def exit_time(exp: ExitExperiment, cfg: Optional[IntegratorConfig] = None) -> ExitOutcome:
    """
    Time until the atom first reaches a detector, or Timeout at tau_max.

    Integration failures raise; a timeout is a result, not an error.
    """
    base = cfg or IntegratorConfig()
    run_cfg = base.model_copy(update={"max_tau": exp.tau_max, "sample_interval": None})
    left, right = exp.detectors
    events = [EventSpec.detector(left), EventSpec.detector(right)]
    traj = integrate(SystemKind.REDUCED, exp.initial_state(), exp.prm, run_cfg, events=events)
    hits = traj.events_of(EventKind.DETECTOR_HIT)
    if not hits:
        return ExitOutcome.timeout()
    first = hits[0]
    detector = left if abs(first.state[0] - left) < abs(first.state[0] - right) else right
    return ExitOutcome.exit(first.time, detector)


Evaluator = Callable[[float], ExitOutcome]


def _evaluate_point(value: float, template: ExitExperiment, axis: ScanAxis,
                    cfg: Optional[IntegratorConfig]) -> ExitOutcome:
    return exit_time(template.along(axis, value), cfg)


def experiment_evaluator(template: ExitExperiment, axis: ScanAxis,
                         cfg: Optional[IntegratorConfig] = None) -> Evaluator:
    """Picklable evaluator varying one parameter of the template."""
    return partial(_evaluate_point, template=template, axis=axis, cfg=cfg)


@dataclass
class ScanInterval:
    """Adjacent pair of scan points at one refinement level."""

    level: int
    index: int
    parent: int
    lo: int
    hi: int
    variation: float
    mixed: bool
    flagged: bool = False


@dataclass
class LevelStats:
    level: int
    intervals: int
    flagged: int
    flagged_length_fraction: float
    total_variation: float
    mean_flagged_variation: float
    timeout_fraction: float
    mean_T: float


@dataclass
class ScanLevel:
    """Points evaluated at one level and the intervals they form."""

    params: np.ndarray
    outcomes: List[ExitOutcome]
    intervals: List[ScanInterval]
    stats: Optional[LevelStats] = None


@dataclass
class ExitScan:
    axis: ScanAxis
    levels: List[ScanLevel]
    threshold: float
    template: Optional[ExitExperiment] = None
    cfg: Optional[IntegratorConfig] = None

    @property
    def values(self) -> np.ndarray:
        return self.levels[0].params

    @property
    def results(self) -> List[ExitOutcome]:
        return self.levels[0].outcomes

    def rows(self) -> List[Tuple[int, int, float, float, str]]:
        """(level, parent_interval, param, T, outcome); parent is −1 at the root."""
        out = []
        for lvl, level in enumerate(self.levels):
            parents = np.full(len(level.params), -1)
            for interval in level.intervals:
                parents[interval.lo] = interval.parent
                parents[interval.hi] = interval.parent
            for k, (x, o) in enumerate(zip(level.params, level.outcomes)):
                T = o.T if o.T is not None else float("nan")
                out.append((lvl, int(parents[k]), float(x), float(T), o.kind.value))
        return out


def _outcomes(values: Sequence[float], evaluator: Evaluator, workers: int) -> List[ExitOutcome]:
    results = sweep_orchestrator(evaluator, list(values), workers=workers)
    return [r.value if r.ok else ExitOutcome.failed(f"{r.category}: {r.error}") for r in results]


def _pair(a: ExitOutcome, b: ExitOutcome) -> Tuple[float, bool]:
    if a.finite and b.finite:
        return abs(b.T - a.T), False
    mixed = {a.kind, b.kind} == {OutcomeKind.EXIT, OutcomeKind.TIMEOUT}
    return 0.0, mixed


def _root_threshold(outcomes: Sequence[ExitOutcome], factor: float) -> float:
    diffs = [abs(b.T - a.T) for a, b in zip(outcomes[:-1], outcomes[1:]) if a.finite and b.finite]
    if not diffs:
        return 0.0
    return factor * float(np.median(diffs))


def _flag(intervals: List[ScanInterval], threshold: float, max_flagged: int) -> None:
    candidates = [iv for iv in intervals if iv.mixed or (iv.variation > threshold and iv.variation > 0.0)]
    # strongest first; mixed exit/timeout pairs rank above any finite jump
    candidates.sort(key=lambda iv: (not iv.mixed, -iv.variation, iv.index))
    for iv in candidates[:max_flagged]:
        iv.flagged = True


def _stats(level_no: int, level: ScanLevel, span: float) -> LevelStats:
    flagged = [iv for iv in level.intervals if iv.flagged]
    lengths = sum(level.params[iv.hi] - level.params[iv.lo] for iv in flagged)
    finite_T = [o.T for o in level.outcomes if o.finite]
    counted = [o for o in level.outcomes if o.kind is not OutcomeKind.FAILED]
    timeouts = sum(1 for o in counted if o.kind is OutcomeKind.TIMEOUT)
    variations = [iv.variation for iv in flagged if not iv.mixed]
    return LevelStats(
        level=level_no,
        intervals=len(level.intervals),
        flagged=len(flagged),
        flagged_length_fraction=float(lengths / span) if span > 0 else 0.0,
        total_variation=float(sum(iv.variation for iv in flagged)),
        mean_flagged_variation=float(np.mean(variations)) if variations else 0.0,
        timeout_fraction=timeouts / len(counted) if counted else 0.0,
        mean_T=float(np.mean(finite_T)) if finite_T else float("nan"),
    )


def _build_level(params: np.ndarray, outcomes: List[ExitOutcome], parents: Sequence[int],
                 groups: Sequence[Tuple[int, int]], level_no: int) -> ScanLevel:
    """groups: (start, end) point-index ranges; consecutive points inside each form intervals."""
    intervals = []
    for parent, (start, end) in zip(parents, groups):
        for i in range(start, end):
            variation, mixed = _pair(outcomes[i], outcomes[i + 1])
            intervals.append(ScanInterval(level=level_no, index=len(intervals), parent=parent,
                                          lo=i, hi=i + 1, variation=variation, mixed=mixed))
    return ScanLevel(params=params, outcomes=outcomes, intervals=intervals)


def exit_scan(
    axis: ScanAxis,
    values: Sequence[float],
    template: Optional[ExitExperiment] = None,
    cfg: Optional[IntegratorConfig] = None,
    evaluator: Optional[Evaluator] = None,
    threshold_factor: float = DEFAULT_THRESHOLD_FACTOR,
    max_flagged: int = DEFAULT_MAX_FLAGGED,
    workers: int = 1,
) -> ExitScan:
    """
    Exit time at each value of the scanned parameter.

    The flagging threshold is threshold_factor × the median |ΔT| between
    neighbouring finite points of this root scan; it is reused unchanged by
    every refinement level.
    """
    grid = np.sort(np.asarray(values, dtype=float))
    if evaluator is None:
        if template is None:
            raise ValueError("exit_scan needs a template experiment or an evaluator")
        evaluator = experiment_evaluator(template, axis, cfg)
    outcomes = _outcomes(grid, evaluator, workers)
    threshold = _root_threshold(outcomes, threshold_factor)
    level = _build_level(grid, outcomes, [-1], [(0, len(grid) - 1)], 0)
    _flag(level.intervals, threshold, max_flagged)
    span = float(grid[-1] - grid[0]) if len(grid) > 1 else 0.0
    level.stats = _stats(0, level, span)
    logger.info("Exit scan done", axis=axis.value, points=len(grid), flagged=level.stats.flagged,
                timeouts=level.stats.timeout_fraction)
    return ExitScan(axis=axis, levels=[level], threshold=threshold, template=template, cfg=cfg)


def refine_singular(
    scan: ExitScan,
    depth: int,
    zoom: int = 10,
    evaluator: Optional[Evaluator] = None,
    max_flagged: int = DEFAULT_MAX_FLAGGED,
    workers: int = 1,
) -> ExitScan:
    """
    Re-scan flagged intervals at `zoom` times finer spacing, `depth` times.

    Each flagged interval [a, b] becomes zoom sub-intervals; the endpoints
    keep their parent outcomes. Levels with nothing flagged still produce an
    (empty) next level so the depth is always reported.
    """
    if depth <= 0:
        return scan
    if zoom < 2:
        raise ValueError("zoom must be at least 2")
    if evaluator is None:
        if scan.template is None:
            raise ValueError("refine_singular needs an evaluator when the scan has no template")
        evaluator = experiment_evaluator(scan.template, scan.axis, scan.cfg)

    root_span = float(scan.values[-1] - scan.values[0]) if len(scan.values) > 1 else 0.0
    levels = list(scan.levels)
    for _ in range(depth):
        parent = levels[-1]
        level_no = len(levels)
        flagged = [iv for iv in parent.intervals if iv.flagged]

        params: List[float] = []
        known: List[Optional[ExitOutcome]] = []
        groups: List[Tuple[int, int]] = []
        parents: List[int] = []
        for iv in flagged:
            a, b = parent.params[iv.lo], parent.params[iv.hi]
            sub = np.linspace(a, b, zoom + 1)
            start = len(params)
            params.extend(sub.tolist())
            known.extend([parent.outcomes[iv.lo]] + [None] * (zoom - 1) + [parent.outcomes[iv.hi]])
            groups.append((start, start + zoom))
            parents.append(iv.index)

        todo = [k for k, o in enumerate(known) if o is None]
        fresh = _outcomes([params[k] for k in todo], evaluator, workers)
        for k, o in zip(todo, fresh):
            known[k] = o

        level = _build_level(np.array(params), list(known), parents, groups, level_no)
        _flag(level.intervals, scan.threshold, max_flagged)
        level.stats = _stats(level_no, level, root_span)
        levels.append(level)
        logger.info("Refinement level done", level=level_no, intervals=level.stats.intervals,
                    flagged=level.stats.flagged)

    return ExitScan(axis=scan.axis, levels=levels, threshold=scan.threshold,
                    template=scan.template, cfg=scan.cfg)


@dataclass
class FractalReport:
    verdict: Verdict
    levels: List[LevelStats] = field(default_factory=list)
    mean_T_growth: List[float] = field(default_factory=list)
    reason: Optional[str] = None


def fractal_signature(scan: ExitScan, decay_threshold: float = 0.1, min_levels: int = 3) -> FractalReport:
    """
    Fractal if every level keeps flagged intervals and the mean variation of
    the deepest level's flagged intervals has not decayed below
    decay_threshold × the root level's; Smooth otherwise.
    """
    stats = [lvl.stats for lvl in scan.levels if lvl.stats is not None]
    growth = [s.mean_T for s in stats]
    if len(stats) < min_levels:
        return FractalReport(Verdict.INCONCLUSIVE, stats, growth,
                             reason=f"{len(stats)} levels, need {min_levels}")
    if any(s.flagged == 0 for s in stats):
        return FractalReport(Verdict.SMOOTH, stats, growth)

    root, deepest = stats[0].mean_flagged_variation, stats[-1].mean_flagged_variation
    deepest_level = scan.levels[-1]
    deepest_mixed = any(iv.flagged and iv.mixed for iv in deepest_level.intervals)
    if deepest_mixed or root == 0.0 or deepest >= decay_threshold * root:
        return FractalReport(Verdict.FRACTAL, stats, growth)
    return FractalReport(Verdict.SMOOTH, stats, growth)


def cantor_exit_time(x: float, max_digits: int = 30, scale: float = 10.0) -> ExitOutcome:
    """
    Synthetic exit time singular on the middle-thirds Cantor set.

    T(x) = scale × position of the first ternary digit equal to 1; points
    with no such digit within max_digits never exit.
    """
    frac = x - math.floor(x)
    for k in range(1, max_digits + 1):
        frac *= 3.0
        digit = int(frac)
        frac -= digit
        if digit == 1:
            return ExitOutcome.exit(scale * k)
    return ExitOutcome.timeout()
