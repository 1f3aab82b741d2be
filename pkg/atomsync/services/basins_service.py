"""
Standing Wave Sync - Basins Service

Basins of attraction over the plane of initial inversion z0 and initial
momentum p0, refined sub-windows and the riddling (label-mixing) indicator.
"""

from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Tuple

import numpy as np
import structlog

from atomsync.errors import ParameterError
from atomsync.models import ReducedState, SystemParams
from atomsync.services.cycles_service import ClassifierSettings, classify_attractor
from atomsync.services.integrator_service import IntegratorConfig
from atomsync.services.sweep_service import CellResult, sweep_orchestrator

logger = structlog.get_logger(__name__)

# Grey level per category for PGM export (255 = white)
PGM_SHADES: Dict[str, int] = {
    "1": 255,
    "2": 200,
    "3": 140,
    "4-12": 70,
    "chaos": 0,
    "unresolved": 110,
}


@dataclass
class BasinGrid:
    """Category labels on a (z0, p0) grid; rows follow z0, columns p0."""

    z0_range: Tuple[float, float]
    p0_range: Tuple[float, float]
    dims: Tuple[int, int]
    labels: np.ndarray
    failed: List[CellResult] = field(default_factory=list)

    @property
    def z0_values(self) -> np.ndarray:
        return np.linspace(self.z0_range[0], self.z0_range[1], self.dims[0])

    @property
    def p0_values(self) -> np.ndarray:
        return np.linspace(self.p0_range[0], self.p0_range[1], self.dims[1])

    def distinct_labels(self) -> List[str]:
        return sorted(set(self.labels.ravel().tolist()))

    def rows(self) -> List[Tuple[float, float, str]]:
        return [
            (float(z0), float(p0), str(self.labels[i, j]))
            for i, z0 in enumerate(self.z0_values)
            for j, p0 in enumerate(self.p0_values)
        ]

    def shades(self) -> np.ndarray:
        mid = PGM_SHADES["unresolved"]
        return np.vectorize(lambda c: PGM_SHADES.get(c, mid), otypes=[np.uint8])(self.labels)


@dataclass
class RiddlingReport:
    overall: float
    per_label: Dict[str, float]
    refined_overall: Optional[float] = None

    @property
    def persistence(self) -> Optional[float]:
        """Refined mixing fraction relative to the parent's; None without refinement."""
        if self.refined_overall is None:
            return None
        if self.overall == 0.0:
            return 1.0 if self.refined_overall == 0.0 else float("inf")
        return self.refined_overall / self.overall


def basin_initial_state(z0: float, p0: float) -> ReducedState:
    """Scanned (z0, p0) with ξ0 = 0 and u0 = v0 = 0."""
    return ReducedState(xi=0.0, p=p0, u=0.0, v=0.0, z=z0)


def _basin_cell(
    cell: Tuple[float, float],
    prm: SystemParams,
    cfg: Optional[IntegratorConfig],
    settings: Optional[ClassifierSettings],
) -> str:
    z0, p0 = cell
    return classify_attractor(prm, basin_initial_state(z0, p0), cfg, settings).category


def basin_map(
    prm: SystemParams,
    z0_range: Tuple[float, float] = (-1.0, 1.0),
    p0_range: Tuple[float, float] = (0.0, 100.0),
    dims: Tuple[int, int] = (200, 200),
    cfg: Optional[IntegratorConfig] = None,
    settings: Optional[ClassifierSettings] = None,
    workers: int = 1,
) -> BasinGrid:
    """Classify every grid cell; failed cells are labelled unresolved."""
    if dims[0] < 2 or dims[1] < 2:
        raise ParameterError("Basin grids need at least 2x2 cells")
    if max(abs(z0_range[0]), abs(z0_range[1])) > 1.0:
        raise ParameterError("Initial inversion must satisfy |z0| <= 1")

    z0s = np.linspace(z0_range[0], z0_range[1], dims[0])
    p0s = np.linspace(p0_range[0], p0_range[1], dims[1])
    cells = [(z0, p0) for z0 in z0s for p0 in p0s]
    task = partial(_basin_cell, prm=prm, cfg=cfg, settings=settings)
    results = sweep_orchestrator(task, cells, workers=workers)
    flat = [r.value if r.ok else "unresolved" for r in results]
    labels = np.array(flat, dtype=object).reshape(dims)
    grid = BasinGrid(
        z0_range=tuple(z0_range), p0_range=tuple(p0_range), dims=tuple(dims),
        labels=labels, failed=[r for r in results if not r.ok],
    )
    logger.info("Basin map done", dims=dims, labels=grid.distinct_labels(), failed=len(grid.failed))
    return grid


def refine_window(
    prm: SystemParams,
    parent: BasinGrid,
    z0_range: Tuple[float, float],
    p0_range: Tuple[float, float],
    factor: int = 2,
    cfg: Optional[IntegratorConfig] = None,
    settings: Optional[ClassifierSettings] = None,
    workers: int = 1,
) -> BasinGrid:
    """
    Recompute a sub-window at `factor` times the parent's resolution.

    The sub-grid keeps the parent's cell spacing divided by `factor`, so
    parent nodes inside the window are also nodes of the refined grid.
    """
    if parent.z0_range[1] == parent.z0_range[0] or parent.p0_range[1] == parent.p0_range[0]:
        raise ParameterError(
            f"Parent grid has zero extent (z0 {parent.z0_range}, p0 {parent.p0_range}); no spacing to refine"
        )
    dz = (parent.z0_range[1] - parent.z0_range[0]) / (parent.dims[0] - 1)
    dp = (parent.p0_range[1] - parent.p0_range[0]) / (parent.dims[1] - 1)
    nz = max(int(round((z0_range[1] - z0_range[0]) / dz * factor)) + 1, 2)
    np_ = max(int(round((p0_range[1] - p0_range[0]) / dp * factor)) + 1, 2)
    return basin_map(prm, z0_range, p0_range, (nz, np_), cfg, settings, workers)


def _mixed_mask(labels: np.ndarray) -> np.ndarray:
    rows, cols = labels.shape
    mixed = np.zeros(labels.shape, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            src = labels[max(0, -di):rows - max(0, di), max(0, -dj):cols - max(0, dj)]
            nbr = labels[max(0, di):rows - max(0, -di), max(0, dj):cols - max(0, -dj)]
            view = mixed[max(0, -di):rows - max(0, di), max(0, -dj):cols - max(0, dj)]
            view |= src != nbr
    return mixed


def riddling_indicator(bg: BasinGrid, refined: Optional[BasinGrid] = None) -> RiddlingReport:
    """
    Fraction of cells with at least one differently labelled 8-neighbour.

    Reported overall and per label; with a refined sub-window the refined
    fraction is reported alongside so persistence can be judged.
    """
    labels = np.asarray(bg.labels)
    mixed = _mixed_mask(labels)
    per_label = {}
    for label in sorted(set(labels.ravel().tolist())):
        mask = labels == label
        per_label[label] = float(mixed[mask].mean())
    refined_overall = None
    if refined is not None:
        refined_overall = float(_mixed_mask(np.asarray(refined.labels)).mean())
    return RiddlingReport(overall=float(mixed.mean()), per_label=per_label, refined_overall=refined_overall)
