"""
Standing Wave Sync - Chaos Service

Maximal Lyapunov exponent by two-trajectory renormalisation, Lyapunov maps
over (n, δ) and λ(n) scans, and the box-counting dimension of attractor
samples.
"""

import math
from dataclasses import dataclass
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from atomsync.errors import InsufficientDataError, IntegrationError
from atomsync.models import NoiseSpec, ReducedState, SystemParams
from atomsync.services.integrator_service import IntegratorConfig, SystemKind, make_rhs, propagate
from atomsync.services.sweep_service import CellResult, sweep_orchestrator

logger = structlog.get_logger(__name__)

LYAPUNOV_BLOCKS = 20
MIN_BOX_SCALES = 5
SATURATION_FRACTION = 0.2


class LyapunovSettings(BaseModel):
    """Accumulation protocol for max_lyapunov."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    d0: float = Field(default=1e-8, gt=0, description="Initial and renormalised separation")
    renorm_interval: float = Field(default=1.0, gt=0)
    transient: float = Field(default=2e3, ge=0)
    horizon: float = Field(default=5e4, gt=0)

    @model_validator(mode="after")
    def _long_enough(self) -> "LyapunovSettings":
        if self.horizon < 100 * self.renorm_interval:
            raise ValueError("horizon must cover at least 100 renormalisation intervals")
        return self


@dataclass
class LyapunovEstimate:
    lambda_: float
    stderr: float
    horizon: float
    renorm_interval: float


@dataclass
class DimensionEstimate:
    """Box-counting slope with the scaling window that produced it."""

    dimension: float
    r_squared: float
    eps_min: float
    eps_max: float
    scales: np.ndarray
    counts: np.ndarray


def embed(states: np.ndarray) -> np.ndarray:
    """Map reduced states (ξ, p, u, v, z) to (p, u, v, z, cos ξ, sin ξ)."""
    states = np.atleast_2d(states)
    xi = states[:, 0]
    return np.column_stack((states[:, 1], states[:, 2], states[:, 3], states[:, 4], np.cos(xi), np.sin(xi)))


def _separation(a: np.ndarray, b: np.ndarray) -> float:
    # chord length on the circle for ξ, Euclidean elsewhere
    dxi = 2.0 * math.sin(0.5 * (b[0] - a[0]))
    rest = b[1:] - a[1:]
    return math.sqrt(dxi * dxi + float(np.dot(rest, rest)))


def _pair_rhs(prm: SystemParams, noise: Optional[NoiseSpec] = None):
    single = make_rhs(SystemKind.REDUCED, prm, noise)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return np.concatenate((single(t, y[:5]), single(t, y[5:])))

    return rhs


def max_lyapunov(
    prm: SystemParams,
    s0: ReducedState,
    cfg: Optional[IntegratorConfig] = None,
    settings: Optional[LyapunovSettings] = None,
    noise: Optional[NoiseSpec] = None,
) -> LyapunovEstimate:
    """
    Maximal Lyapunov exponent of the reduced flow.

    A reference and a perturbed copy are integrated together; every
    renorm_interval the separation is measured and reset to d0 along the
    current direction. λ is the mean log growth rate after the transient,
    stderr the spread of block means.
    """
    cfg = cfg or IntegratorConfig()
    settings = settings or LyapunovSettings()
    rhs = _pair_rhs(prm, noise)
    d0, dt = settings.d0, settings.renorm_interval

    ref = s0.require_finite().as_array()
    if settings.transient > 0:
        ref = propagate(make_rhs(SystemKind.REDUCED, prm, noise), ref, 0.0, settings.transient, cfg)
    t = settings.transient

    direction = np.ones(5) / math.sqrt(5.0)
    pert = ref + d0 * direction

    steps = int(round(settings.horizon / dt))
    logs = np.empty(steps)
    for k in range(steps):
        pair = propagate(rhs, np.concatenate((ref, pert)), t, t + dt, cfg)
        ref, pert = pair[:5], pair[5:]
        t += dt
        d = _separation(ref, pert)
        if not math.isfinite(d) or d == 0.0:
            raise IntegrationError("Separation collapsed or diverged", last_time=t, last_state=ref)
        logs[k] = math.log(d / d0)
        diff = pert - ref
        diff[0] = 2.0 * math.sin(0.5 * diff[0])
        pert = ref + diff * (d0 / d)

    rates = logs / dt
    lam = float(np.mean(rates))
    blocks = np.array_split(rates, min(LYAPUNOV_BLOCKS, steps))
    means = np.array([b.mean() for b in blocks])
    stderr = float(np.std(means, ddof=1) / math.sqrt(len(means))) if len(means) > 1 else 0.0
    logger.debug("Lyapunov estimate", n=prm.n, delta=prm.delta, lam=lam, stderr=stderr)
    return LyapunovEstimate(lambda_=lam, stderr=stderr, horizon=settings.horizon, renorm_interval=dt)


def _lyapunov_cell(
    cell: Tuple[float, float],
    base: SystemParams,
    s0: ReducedState,
    cfg: IntegratorConfig,
    settings: LyapunovSettings,
) -> LyapunovEstimate:
    n, delta = cell
    return max_lyapunov(base.with_updates(n=n, delta=delta), s0, cfg, settings)


@dataclass
class LyapunovMap:
    n_values: np.ndarray
    delta_values: np.ndarray
    lambdas: np.ndarray  # shape (len(n), len(delta)); NaN where a cell failed
    stderrs: np.ndarray
    failed: List[CellResult]

    def rows(self) -> List[Tuple[float, float, float, float]]:
        out = []
        for i, n in enumerate(self.n_values):
            for j, d in enumerate(self.delta_values):
                out.append((float(n), float(d), float(self.lambdas[i, j]), float(self.stderrs[i, j])))
        return out


def lyapunov_map(
    base: SystemParams,
    n_values: Sequence[float],
    delta_values: Sequence[float],
    s0: ReducedState,
    cfg: Optional[IntegratorConfig] = None,
    settings: Optional[LyapunovSettings] = None,
    workers: int = 1,
) -> LyapunovMap:
    """λ on the (n, δ) grid; failed cells are NaN and listed in `failed`."""
    cfg = cfg or IntegratorConfig()
    settings = settings or LyapunovSettings()
    n_arr = np.asarray(n_values, dtype=float)
    d_arr = np.asarray(delta_values, dtype=float)
    cells = [(n, d) for n in n_arr for d in d_arr]
    task = partial(_lyapunov_cell, base=base, s0=s0, cfg=cfg, settings=settings)
    results = sweep_orchestrator(task, cells, workers=workers)

    lambdas = np.full(len(cells), np.nan)
    stderrs = np.full(len(cells), np.nan)
    for r in results:
        if r.ok:
            lambdas[r.index] = r.value.lambda_
            stderrs[r.index] = r.value.stderr
    shape = (len(n_arr), len(d_arr))
    return LyapunovMap(
        n_values=n_arr, delta_values=d_arr,
        lambdas=lambdas.reshape(shape), stderrs=stderrs.reshape(shape),
        failed=[r for r in results if not r.ok],
    )


def lyapunov_scan(
    base: SystemParams,
    n_values: Sequence[float],
    s0: ReducedState,
    cfg: Optional[IntegratorConfig] = None,
    settings: Optional[LyapunovSettings] = None,
    workers: int = 1,
) -> LyapunovMap:
    """λ as a function of n at the base detuning."""
    return lyapunov_map(base, n_values, [base.delta], s0, cfg, settings, workers)


def _box_count(points: np.ndarray, eps: float) -> int:
    cells = np.floor(points / eps).astype(np.int64)
    return int(np.unique(cells, axis=0).shape[0])


def box_counts(points: np.ndarray, scales: Sequence[float], workers: int = 1) -> np.ndarray:
    """Number of occupied boxes at each edge length."""
    task = partial(_box_count, points)
    results = sweep_orchestrator(task, list(scales), workers=workers)
    return np.array([r.value for r in results], dtype=float)


def box_counting_dimension(
    points: np.ndarray,
    scales: Optional[Sequence[float]] = None,
    min_window: int = 4,
    normalise: bool = True,
    workers: int = 1,
) -> DimensionEstimate:
    """
    Box-counting dimension of a point cloud.

    Points are shifted to the origin and, when `normalise` is set, scaled so
    the largest extent is 1. The default scales are dyadic 2^-1 ... 2^-10.
    The log-log slope is fitted on every contiguous window of at least
    `min_window` scales and the window with the best R² wins.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0:
        raise InsufficientDataError("No points to box-count")
    pts = pts - pts.min(axis=0)
    extent = float(pts.max()) if pts.size else 0.0
    if normalise and extent > 0:
        pts = pts / extent

    eps = np.sort(np.asarray(scales if scales is not None else 2.0 ** -np.arange(1, 11), dtype=float))[::-1]
    if len(eps) < MIN_BOX_SCALES or len(eps) < min_window:
        raise InsufficientDataError(f"Need at least {max(MIN_BOX_SCALES, min_window)} scales, got {len(eps)}")

    all_counts = box_counts(pts, eps, workers=workers)
    # scales where nearly every point has its own box carry no geometry
    usable = (all_counts < SATURATION_FRACTION * len(pts)) | (all_counts <= 1)
    if usable.sum() < min_window:
        raise InsufficientDataError(
            f"Only {int(usable.sum())} unsaturated scales; add points or coarser scales"
        )
    eps, counts = eps[usable], all_counts[usable]
    x = np.log(1.0 / eps)
    y = np.log(counts)

    best: Optional[Tuple[float, float, int, int]] = None
    for lo in range(len(eps) - min_window + 1):
        for hi in range(lo + min_window, len(eps) + 1):
            xs, ys = x[lo:hi], y[lo:hi]
            slope, intercept = np.polyfit(xs, ys, 1)
            resid = ys - (slope * xs + intercept)
            ss_tot = float(np.sum((ys - ys.mean()) ** 2))
            r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
            key = (r2, hi - lo)
            if best is None or key > (best[1], best[3] - best[2]):
                best = (float(slope), r2, lo, hi)

    slope, r2, lo, hi = best
    return DimensionEstimate(
        dimension=max(slope, 0.0),
        r_squared=r2,
        eps_min=float(eps[hi - 1]),
        eps_max=float(eps[lo]),
        scales=eps,
        counts=counts,
    )
