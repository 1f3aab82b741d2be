"""
Standing Wave Sync - Mechanical Observables

Node-to-node flight averages, the empirical friction curve with its
attractor/repellor zeros, velocity-grouping detection and segmentation of
random-walk trajectories into trapped and flight episodes.

Sign convention throughout: F ≡ −d|p̄|/dτ, so F > 0 decelerates.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.integrate import trapezoid

from atomsync.errors import AllTrappedError, InsufficientDataError, IntegrationError
from atomsync.models import SystemParams, ground_state
from atomsync.services.integrator_service import (
    EventKind,
    EventSpec,
    IntegratorConfig,
    SystemKind,
    Trajectory,
    integrate,
)
from atomsync.services.sweep_service import sweep_orchestrator

logger = structlog.get_logger(__name__)

# Minimum node-to-node flights without reversal for a point to count as ballistic
BALLISTIC_CROSSINGS = 10


class ZeroKind(str, Enum):
    """Character of a friction zero in velocity space."""
    ATTRACTOR = "attractor"
    REPELLOR = "repellor"


@dataclass
class FlightSeries:
    """Per-flight averages between successive distinct nodes."""
    p_bar: np.ndarray
    mid_times: np.ndarray
    dp_bar_dtau: np.ndarray
    trapped: bool = False

    def pairs(self) -> List[Tuple[float, float]]:
        return list(zip(self.p_bar.tolist(), self.dp_bar_dtau.tolist()))


@dataclass
class FrictionZero:
    p_zero: float
    kind: ZeroKind


@dataclass
class FrictionCurve:
    """Empirical F(|p̄|) samples, its zeros and characteristic momenta."""
    samples: np.ndarray  # columns: p_bar, F
    zeros: List[FrictionZero]
    p_cr: float
    p_a: Optional[float]
    p_b: Optional[float]
    trapped_points: List[float] = field(default_factory=list)

    def attractors(self) -> List[float]:
        return [z.p_zero for z in self.zeros if z.kind is ZeroKind.ATTRACTOR]

    def attractor_bracket(self, p: float) -> Optional[Tuple[float, float]]:
        """
        Velocity-space basin of the attractor zero that holds |p|.

        Bounded by the neighbouring repellor zeros, or by the ends of the
        sampled range; None when |p| falls in no attractor's basin.
        """
        edges = [float(self.samples[0, 0])]
        edges += [z.p_zero for z in self.zeros if z.kind is ZeroKind.REPELLOR]
        edges.append(float(self.samples[-1, 0]))
        target = abs(p)
        for lo, hi in zip(edges[:-1], edges[1:]):
            if lo <= target <= hi and any(lo <= a <= hi for a in self.attractors()):
                return lo, hi
        return None


@dataclass
class GroupingResult:
    """Velocity grouping verdict over a set of initial momenta."""
    grouped: bool
    final_momenta: List[float]
    spread: float
    p_s: Optional[float] = None


def _node_index(xi: float) -> int:
    return int(round((xi - 0.5 * math.pi) / math.pi))


def node_flight_averages(traj: Trajectory) -> FlightSeries:
    """
    Average p over each flight between two successive, different nodes.

    Endpoints come from the root-polished node events; interior samples are
    integrated with the trapezoidal rule. The derivative of p̄ is taken over
    mid-flight times.
    """
    nodes = traj.events_of(EventKind.NODE_CROSSING)
    times = traj.times
    p_col = traj.column("p")

    p_bars: List[float] = []
    mids: List[float] = []
    for start, end in zip(nodes[:-1], nodes[1:]):
        if _node_index(start.state[0]) == _node_index(end.state[0]):
            continue
        inside = (times > start.time) & (times < end.time)
        t = np.concatenate(([start.time], times[inside], [end.time]))
        p = np.concatenate(([start.state[1]], p_col[inside], [end.state[1]]))
        duration = end.time - start.time
        if duration <= 0.0:
            continue
        p_bars.append(float(trapezoid(p, t) / duration))
        mids.append(0.5 * (start.time + end.time))

    if len(p_bars) < 2:
        # a single flight has no slope; reported as trapped with no samples
        return FlightSeries(p_bar=np.empty(0), mid_times=np.empty(0), dp_bar_dtau=np.empty(0), trapped=True)
    p_bar = np.array(p_bars)
    mid = np.array(mids)
    return FlightSeries(p_bar=p_bar, mid_times=mid, dp_bar_dtau=np.gradient(p_bar, mid))


def _is_ballistic(traj: Trajectory) -> bool:
    nodes = traj.events_of(EventKind.NODE_CROSSING)
    if len(nodes) < BALLISTIC_CROSSINGS:
        return False
    indices = [_node_index(e.state[0]) for e in nodes]
    steps = np.diff(indices)
    if np.any(steps == 0):
        return False
    return bool(np.all(steps > 0) or np.all(steps < 0))


def _flight_horizon(p0: float, prm: SystemParams, flights: int) -> float:
    speed = max(prm.alpha * abs(p0), 1e-12)
    return 1.5 * (flights + 2) * math.pi / speed


def _friction_point(
    p0: float,
    prm: SystemParams,
    cfg: IntegratorConfig,
    flights: int,
    settle_flights: int,
) -> Tuple[float, Optional[float], Optional[float]]:
    """Returns (p0, |p̄|, F) with None entries for a trapped start."""
    horizon = min(_flight_horizon(p0, prm, flights + settle_flights), cfg.max_tau)
    run_cfg = cfg.model_copy(update={"max_tau": horizon})
    traj = integrate(SystemKind.REDUCED, ground_state(0.0, p0), prm, run_cfg,
                     events=[EventSpec.node_crossing()])
    if not _is_ballistic(traj):
        return p0, None, None
    series = node_flight_averages(traj)
    used = slice(settle_flights, None)
    p_abs = np.abs(series.p_bar[used])
    mids = series.mid_times[used]
    if p_abs.size < 2:
        return p0, None, None
    slope = np.polyfit(mids, p_abs, 1)[0]
    return p0, float(np.mean(p_abs)), float(-slope)


def _zeros(p: np.ndarray, f: np.ndarray) -> List[FrictionZero]:
    signs = np.where(f >= 0.0, 1.0, -1.0)
    zeros: List[FrictionZero] = []
    for i in range(len(p) - 1):
        if signs[i] == signs[i + 1]:
            continue
        df = f[i + 1] - f[i]
        root = p[i] - f[i] * (p[i + 1] - p[i]) / df if df != 0 else 0.5 * (p[i] + p[i + 1])
        kind = ZeroKind.ATTRACTOR if df > 0 else ZeroKind.REPELLOR
        zeros.append(FrictionZero(p_zero=float(root), kind=kind))
    return zeros


def assemble_friction_curve(points: Sequence[Tuple[float, Optional[float], Optional[float]]]) -> FrictionCurve:
    """Build the curve from (p0, |p̄|, F) records; trapped records carry None."""
    trapped = sorted(abs(p0) for p0, pb, _ in points if pb is None)
    good = sorted((pb, f) for _, pb, f in points if pb is not None)
    if not good:
        bound = max((abs(p0) for p0, _, _ in points), default=0.0)
        raise AllTrappedError(f"All grid momenta trapped; p_cr exceeds {bound}", p_cr_bound=bound)

    samples = np.array(good, dtype=float)
    zeros = _zeros(samples[:, 0], samples[:, 1])
    ballistic_starts = sorted(abs(p0) for p0, pb, _ in points if pb is not None)
    return FrictionCurve(
        samples=samples,
        zeros=zeros,
        p_cr=ballistic_starts[0],
        p_a=zeros[0].p_zero if zeros else None,
        p_b=zeros[-1].p_zero if zeros else None,
        trapped_points=trapped,
    )


def empirical_friction_curve(
    prm: SystemParams,
    p_grid: Sequence[float],
    flights: int = 20,
    settle_flights: int = 2,
    cfg: Optional[IntegratorConfig] = None,
    workers: int = 1,
) -> FrictionCurve:
    """
    Friction curve from integrated flights launched at each grid momentum.

    Each point starts at ξ = 0 in the ground state; after `settle_flights`
    flights, F is minus the slope of |p̄| against mid-flight time.
    """
    cfg = cfg or IntegratorConfig(max_tau=1e5, sample_interval=0.05)
    task = partial(_friction_point, prm=prm, cfg=cfg, flights=flights, settle_flights=settle_flights)
    results = sweep_orchestrator(task, list(p_grid), workers=workers)
    points = []
    for r in results:
        if r.ok:
            points.append(r.value)
        else:
            points.append((float(p_grid[r.index]), None, None))
    curve = assemble_friction_curve(points)
    logger.info("Friction curve built", samples=len(curve.samples), zeros=len(curve.zeros),
                trapped=len(curve.trapped_points))
    return curve


def momentum_window_average(traj: Trajectory, fraction: float = 0.1) -> float:
    """Mean |p| over the last `fraction` of the recorded time span."""
    t = traj.times
    start = t[-1] - fraction * (t[-1] - t[0])
    mask = t >= start
    return float(np.mean(np.abs(traj.column("p")[mask])))


def peak_force(traj: Trajectory, after: float = 0.0) -> float:
    """Largest |u sin ξ| recorded after `after`."""
    mask = traj.times >= after
    return float(np.max(np.abs(traj.column("u")[mask] * np.sin(traj.column("xi")[mask]))))


def _final_momentum(p0: float, prm: SystemParams, cfg: IntegratorConfig, fraction: float) -> float:
    traj = integrate(SystemKind.REDUCED, ground_state(0.0, p0), prm, cfg)
    return momentum_window_average(traj, fraction)


def detect_grouping(
    prm: SystemParams,
    p0_set: Sequence[float],
    horizon: float,
    spread_tol: float = 0.05,
    window_fraction: float = 0.1,
    cfg: Optional[IntegratorConfig] = None,
    workers: int = 1,
) -> GroupingResult:
    """Whether atoms launched with different momenta settle to a common |p̄|."""
    base = cfg or IntegratorConfig(sample_interval=0.5)
    run_cfg = base.model_copy(update={"max_tau": horizon})
    task = partial(_final_momentum, prm=prm, cfg=run_cfg, fraction=window_fraction)
    results = sweep_orchestrator(task, list(p0_set), workers=workers)
    for r in results:
        if r.ok:
            continue
        message = f"Grouping run {r.index} (p0={p0_set[r.index]}) failed: {r.error}"
        # a blown-up trajectory keeps its own category and last good time
        if r.category == IntegrationError.category:
            raise IntegrationError(message, last_time=r.last_time)
        raise InsufficientDataError(f"{message} ({r.category})")
    finals = [r.value for r in results]

    mean = float(np.mean(finals))
    spread = float((max(finals) - min(finals)) / mean) if mean > 0 else math.inf
    if len(finals) == 1:
        spread = 0.0
    grouped = spread <= spread_tol
    return GroupingResult(
        grouped=grouped, final_momenta=finals, spread=spread, p_s=mean if grouped else None
    )


class EpisodeKind(str, Enum):
    TRAPPED = "trapped"
    FLIGHT = "flight"


@dataclass
class Episode:
    kind: EpisodeKind
    t_start: float
    t_end: float
    xi_start: float
    xi_end: float


def walk_episodes(traj: Trajectory) -> List[Episode]:
    """
    Split a trajectory into trapped and flight episodes.

    Segments between successive turning points (sign changes of p) that
    cover less than half a wavelength (π in ξ) are oscillations inside one
    well; longer ones are flights. Adjacent segments of the same kind merge.
    """
    t = traj.times
    xi = traj.column("xi")
    p = traj.column("p")
    if len(t) < 2:
        return []
    turns = np.nonzero(np.sign(p[1:]) * np.sign(p[:-1]) < 0)[0] + 1
    bounds = [0, *turns.tolist(), len(t) - 1]

    episodes: List[Episode] = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b <= a:
            continue
        kind = EpisodeKind.FLIGHT if abs(xi[b] - xi[a]) >= math.pi else EpisodeKind.TRAPPED
        if episodes and episodes[-1].kind is kind:
            last = episodes[-1]
            episodes[-1] = Episode(kind, last.t_start, float(t[b]), last.xi_start, float(xi[b]))
        else:
            episodes.append(Episode(kind, float(t[a]), float(t[b]), float(xi[a]), float(xi[b])))
    return episodes
