"""
Standing Wave Sync - Sweep Service

Distributes independent sweep cells over worker processes and merges the
results in cell order, so output never depends on the worker count or on
completion order.
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from concurrent.futures.process import BrokenProcessPool
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence

import structlog

logger = structlog.get_logger(__name__)


class CellStatus(str, Enum):
    """Outcome of one sweep cell."""
    DONE = "done"
    FAILED = "failed"


@dataclass
class CellResult:
    """Result (or failure record) of one cell, tagged with its index."""
    index: int
    status: CellStatus
    value: Any = None
    error: Optional[str] = None
    category: Optional[str] = None
    last_time: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.status is CellStatus.DONE


def _run_cell(func: Callable[[Any], Any], index: int, cell: Any) -> CellResult:
    try:
        return CellResult(index=index, status=CellStatus.DONE, value=func(cell))
    except Exception as e:
        return CellResult(
            index=index,
            status=CellStatus.FAILED,
            error=str(e),
            category=getattr(e, "category", type(e).__name__),
            last_time=getattr(e, "last_time", None),
        )


def sweep_orchestrator(
    func: Callable[[Any], Any],
    cells: Sequence[Any],
    workers: int = 1,
) -> List[CellResult]:
    """
    Evaluate func on every cell and return results ordered by cell index.

    func and the cells must be picklable when workers > 1. A cell that raises
    is recorded as failed; a crashed worker marks its outstanding cells failed.
    The sweep always continues.
    """
    if not cells:
        return []

    logger.info("Sweep started", cells=len(cells), workers=workers)
    results: Dict[int, CellResult] = {}

    if workers <= 1:
        for index, cell in enumerate(cells):
            results[index] = _run_cell(func, index, cell)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_run_cell, func, index, cell): index
                for index, cell in enumerate(cells)
            }
            for future in as_completed(futures):
                index = futures[future]
                try:
                    results[index] = future.result()
                except BrokenProcessPool as e:
                    results[index] = CellResult(
                        index=index, status=CellStatus.FAILED,
                        error=str(e) or "worker process died", category="worker_crash",
                    )
                except Exception as e:
                    results[index] = CellResult(
                        index=index, status=CellStatus.FAILED,
                        error=str(e), category=type(e).__name__,
                    )

    ordered = [results[i] for i in range(len(cells))]
    failed = [r for r in ordered if not r.ok]
    for r in failed:
        logger.warning("Sweep cell failed", index=r.index, category=r.category, error=r.error)
    logger.info("Sweep finished", cells=len(cells), failed=len(failed))
    return ordered


def failures(results: Sequence[CellResult]) -> List[CellResult]:
    return [r for r in results if not r.ok]
