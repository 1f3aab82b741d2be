"""
Standing Wave Sync - Cycles Service

Classifies long-term attractors from u = 0 (rising) section clusters,
builds bifurcation diagrams over the photon number and the (n, δ)
synchronization map.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field
from scipy.cluster.hierarchy import fcluster, linkage

from atomsync.models import NoiseSpec, ReducedState, SystemParams
from atomsync.services.chaos_service import LyapunovSettings, max_lyapunov
from atomsync.services.integrator_service import (
    EventSpec,
    IntegratorConfig,
    SystemKind,
    integrate,
    section_points,
)
from atomsync.services.sweep_service import CellResult, sweep_orchestrator

logger = structlog.get_logger(__name__)

CATEGORY_CODES = ("1", "2", "3", "4-12", "chaos", "unresolved")


class LabelKind(str, Enum):
    PERIOD = "period"
    CHAOTIC = "chaotic"
    UNRESOLVED = "unresolved"


class ClassifierSettings(BaseModel):
    """Observation protocol of classify_attractor."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    transient: float = Field(default=2e3, ge=0)
    window: float = Field(default=1e3, gt=0, description="Length of each of the two observation windows")
    cluster_eps: float = Field(default=1e-3, gt=0, description="Merge distance after per-coordinate scaling")
    noisy_cluster_eps: float = Field(default=0.05, gt=0, description="Merge distance when noise is on")
    max_period: int = Field(default=12, ge=1)
    lambda_min: float = Field(default=0.01, description="Chaos threshold")
    lyapunov_horizon: float = Field(default=1e4, gt=0)
    max_section_points: int = Field(default=4000, ge=2, description="Cap per window for clustering")


@dataclass
class AttractorLabel:
    """Period(m), Chaotic or Unresolved, with the diagnostics behind it."""

    kind: LabelKind
    period: Optional[int] = None
    lyapunov: Optional[float] = None
    cluster_count: Optional[int] = None
    transient: float = 0.0
    reason: Optional[str] = None

    @classmethod
    def periodic(cls, m: int, **diag) -> "AttractorLabel":
        return cls(kind=LabelKind.PERIOD, period=m, **diag)

    @classmethod
    def chaotic(cls, lam: float, **diag) -> "AttractorLabel":
        return cls(kind=LabelKind.CHAOTIC, lyapunov=lam, **diag)

    @classmethod
    def unresolved(cls, reason: str, **diag) -> "AttractorLabel":
        return cls(kind=LabelKind.UNRESOLVED, reason=reason, **diag)

    @property
    def category(self) -> str:
        if self.kind is LabelKind.CHAOTIC:
            return "chaos"
        if self.kind is LabelKind.UNRESOLVED:
            return "unresolved"
        if self.period <= 3:
            return str(self.period)
        return "4-12"

    def __str__(self) -> str:
        if self.kind is LabelKind.PERIOD:
            return f"Period({self.period})"
        if self.kind is LabelKind.CHAOTIC:
            return f"Chaotic({self.lyapunov:.3g})"
        return "Unresolved"

    def to_dict(self) -> dict:
        return {
            "label": str(self),
            "category": self.category,
            "period": self.period,
            "lyapunov": self.lyapunov,
            "cluster_count": self.cluster_count,
            "transient": self.transient,
            "reason": self.reason,
        }


@dataclass
class BifurcationRecord:
    n: float
    v_values: np.ndarray
    label: AttractorLabel
    failed: bool = False


@dataclass
class WindowClusters:
    count: int
    centers: np.ndarray
    sequence: np.ndarray
    points: int


def section_coordinates(points: np.ndarray) -> np.ndarray:
    """Section states (ξ, p, u, v, z) as (p, v, z, cos ξ, sin ξ); u is zero there."""
    xi = points[:, 0]
    return np.column_stack((points[:, 1], points[:, 3], points[:, 4], np.cos(xi), np.sin(xi)))


def _scales(samples: np.ndarray) -> np.ndarray:
    std = section_coordinates(samples).std(axis=0)
    return np.where(std > 0.0, std, 1.0)


def cluster_window(coords: np.ndarray, eps: float) -> WindowClusters:
    """Single-linkage clusters at distance eps, labelled in order of first visit."""
    if len(coords) == 0:
        return WindowClusters(0, np.empty((0, coords.shape[1] if coords.ndim == 2 else 0)), np.empty(0, int), 0)
    if len(coords) == 1:
        return WindowClusters(1, coords.copy(), np.zeros(1, dtype=int), 1)
    raw = fcluster(linkage(coords, method="single"), t=eps, criterion="distance")
    # relabel by first appearance so sequences are comparable between windows
    order = {}
    for label in raw:
        order.setdefault(label, len(order))
    seq = np.array([order[label] for label in raw])
    centers = np.array([coords[seq == k].mean(axis=0) for k in range(len(order))])
    return WindowClusters(len(order), centers, seq, len(coords))


def _cyclic(seq: np.ndarray, m: int) -> bool:
    if m <= 1:
        return True
    if len(seq) < 2 * m:
        return False
    if len(set(seq[:m].tolist())) != m:
        return False
    return bool(np.all(seq[m:] == seq[:-m]))


def _centers_match(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    for c in a:
        if np.min(np.linalg.norm(b - c, axis=1)) > tol:
            return False
    return True


def observe_attractor(
    prm: SystemParams,
    s0: ReducedState,
    cfg: Optional[IntegratorConfig] = None,
    settings: Optional[ClassifierSettings] = None,
    noise: Optional[NoiseSpec] = None,
) -> Tuple[AttractorLabel, np.ndarray]:
    """Classify and also return the post-transient section states."""
    cfg = cfg or IntegratorConfig(sample_interval=0.1)
    settings = settings or ClassifierSettings()
    eps = settings.noisy_cluster_eps if noise is not None and noise.amplitude > 0 else settings.cluster_eps
    t_start = settings.transient
    t_mid = t_start + settings.window
    run_cfg = cfg.model_copy(update={"max_tau": t_start + 2.0 * settings.window})
    traj = integrate(SystemKind.REDUCED, s0, prm, run_cfg, events=[EventSpec.section_u0()], noise=noise)

    after = traj.times >= t_start
    scale = _scales(traj.states[after])
    pts = section_points(traj, EventSpec.section_u0(), after=t_start)
    times = np.array([e.time for e in traj.events if e.time >= t_start])
    diag = {"transient": t_start}
    if len(pts) == 0:
        return AttractorLabel.unresolved("no section crossings", cluster_count=0, **diag), pts

    coords = section_coordinates(pts) / scale
    first = coords[times < t_mid][: settings.max_section_points]
    second = coords[times >= t_mid][: settings.max_section_points]
    wa = cluster_window(first, eps)
    wb = cluster_window(second, eps)

    if wa.count == wb.count and wa.count <= settings.max_period:
        m = wa.count
        if wa.points < 2 * m or wb.points < 2 * m:
            return AttractorLabel.unresolved("insufficient data", cluster_count=m, **diag), pts
        if _centers_match(wa.centers, wb.centers, 10 * eps) and _cyclic(wa.sequence, m) and _cyclic(wb.sequence, m):
            return AttractorLabel.periodic(m, cluster_count=m, **diag), pts

    lam_settings = LyapunovSettings(transient=t_start, horizon=settings.lyapunov_horizon)
    estimate = max_lyapunov(prm, s0, cfg, lam_settings, noise=noise)
    count = max(wa.count, wb.count)
    if estimate.lambda_ > settings.lambda_min:
        return AttractorLabel.chaotic(estimate.lambda_, cluster_count=count, **diag), pts
    return AttractorLabel.unresolved(
        "clusters unstable", lyapunov=estimate.lambda_, cluster_count=count, **diag
    ), pts


def classify_attractor(
    prm: SystemParams,
    s0: ReducedState,
    cfg: Optional[IntegratorConfig] = None,
    settings: Optional[ClassifierSettings] = None,
    noise: Optional[NoiseSpec] = None,
) -> AttractorLabel:
    """
    Long-term attractor of the trajectory starting at s0.

    Section points after the transient are split into two equal windows and
    clustered separately. The same count m ≤ max_period in both windows,
    matching centers and a fixed cyclic visiting order give Period(m);
    otherwise λ decides between Chaotic and Unresolved.
    """
    label, _ = observe_attractor(prm, s0, cfg, settings, noise)
    logger.debug("Attractor classified", n=prm.n, delta=prm.delta, label=str(label))
    return label


def _bifurcation_cell(
    n: float,
    base: SystemParams,
    s0: ReducedState,
    cfg: Optional[IntegratorConfig],
    settings: Optional[ClassifierSettings],
    noise: Optional[NoiseSpec],
) -> Tuple[np.ndarray, AttractorLabel]:
    label, pts = observe_attractor(base.with_updates(n=n), s0, cfg, settings, noise)
    v = pts[:, 3] if len(pts) else np.empty(0)
    return v[v < 0.0], label


def bifurcation_scan(
    base: SystemParams,
    n_values: Sequence[float],
    s0: ReducedState,
    cfg: Optional[IntegratorConfig] = None,
    settings: Optional[ClassifierSettings] = None,
    noise: Optional[NoiseSpec] = None,
    workers: int = 1,
) -> List[BifurcationRecord]:
    """Section v-values (v < 0) and label for each n, all from the same s0."""
    task = partial(_bifurcation_cell, base=base, s0=s0, cfg=cfg, settings=settings, noise=noise)
    results = sweep_orchestrator(task, list(n_values), workers=workers)
    records = []
    for n, r in zip(n_values, results):
        if r.ok:
            v, label = r.value
            records.append(BifurcationRecord(n=float(n), v_values=v, label=label))
        else:
            records.append(BifurcationRecord(
                n=float(n), v_values=np.empty(0),
                label=AttractorLabel.unresolved(f"{r.category}: {r.error}"),
                failed=True,
            ))
    return records


def n_grid(n_min: float, n_max: float, n_steps: int) -> np.ndarray:
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    return np.linspace(n_min, n_max, n_steps)


def branch_count(
    records: Sequence[BifurcationRecord],
    rel_gap: float = 0.02,
    period: Optional[int] = 1,
) -> int:
    """
    Distinct v-branches among the records.

    Pools the v-values of records with the given period label (all records
    when period is None), sorts them and splits wherever the gap exceeds
    rel_gap times the largest |v|.
    """
    pooled = [
        r.v_values for r in records
        if len(r.v_values) and (period is None or r.label.period == period)
    ]
    if not pooled:
        return 0
    values = np.sort(np.concatenate(pooled))
    scale = float(np.max(np.abs(values)))
    if scale == 0.0:
        return 1
    return int(np.sum(np.diff(values) > rel_gap * scale)) + 1


@dataclass
class SyncMap:
    n_values: np.ndarray
    delta_values: np.ndarray
    labels: List[List[AttractorLabel]]
    failed: List[CellResult] = field(default_factory=list)

    def categories(self) -> np.ndarray:
        return np.array([[lab.category for lab in row] for row in self.labels])

    def rows(self) -> List[Tuple[float, float, str]]:
        return [
            (float(n), float(d), self.labels[i][j].category)
            for i, n in enumerate(self.n_values)
            for j, d in enumerate(self.delta_values)
        ]


def _sync_cell(
    cell: Tuple[float, float],
    base: SystemParams,
    s0: ReducedState,
    cfg: Optional[IntegratorConfig],
    settings: Optional[ClassifierSettings],
) -> AttractorLabel:
    n, delta = cell
    return classify_attractor(base.with_updates(n=n, delta=delta), s0, cfg, settings)


def synchronization_map(
    base: SystemParams,
    n_values: Sequence[float],
    delta_values: Sequence[float],
    s0: ReducedState,
    cfg: Optional[IntegratorConfig] = None,
    settings: Optional[ClassifierSettings] = None,
    workers: int = 1,
) -> SyncMap:
    """Attractor label for every (n, δ) cell, all from the same s0."""
    n_arr = np.asarray(n_values, dtype=float)
    d_arr = np.asarray(delta_values, dtype=float)
    cells = [(n, d) for n in n_arr for d in d_arr]
    task = partial(_sync_cell, base=base, s0=s0, cfg=cfg, settings=settings)
    results = sweep_orchestrator(task, cells, workers=workers)

    flat = [
        r.value if r.ok else AttractorLabel.unresolved(f"{r.category}: {r.error}")
        for r in results
    ]
    width = len(d_arr)
    labels = [flat[i * width:(i + 1) * width] for i in range(len(n_arr))]
    return SyncMap(n_values=n_arr, delta_values=d_arr, labels=labels, failed=[r for r in results if not r.ok])
