"""
Standing Wave Sync - Output Service

Writers for the run directory: CSV tables, PGM basin images and the JSON
manifest that describes every file of a run.
"""

import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import structlog

from atomsync.services.sweep_service import CellResult

logger = structlog.get_logger(__name__)

FLOAT_FORMAT = "%.12g"
MANIFEST_NAME = "manifest.json"


def ensure_dir(path: Union[str, Path]) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_csv(path: Union[str, Path], columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write rows under a fixed header with a stable float format."""
    frame = pd.DataFrame(list(rows), columns=list(columns))
    target = Path(path)
    frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("CSV written", path=str(target), rows=len(frame))
    return target


def write_pgm(path: Union[str, Path], shades: np.ndarray) -> Path:
    """Binary (P5) greyscale image; row 0 of `shades` is the top row."""
    img = np.asarray(shades, dtype=np.uint8)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2-D array")
    rows, cols = img.shape
    target = Path(path)
    with open(target, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    return target


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("Not a binary PGM file")
    cols, rows = (int(x) for x in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(rows, cols)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        f = float(value)
        return f if math.isfinite(f) else str(f)
    if isinstance(value, np.integer):
        return int(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


class RunManifest:
    """
    Collects what a command produced and writes manifest.json.

    Provides:
    - The resolved experiment configuration and seed
    - Code version
    - Output files, results, warnings and failed cells
    """

    def __init__(self, command: str, config: Dict[str, Any], seed: int, code_version: str):
        self.command = command
        self.config = config
        self.seed = seed
        self.code_version = code_version
        self.files: List[str] = []
        self.results: Dict[str, Any] = {}
        self.warnings: List[str] = []
        self.failed_cells: List[Dict[str, Any]] = []

    def add_file(self, path: Union[str, Path]) -> None:
        self.files.append(Path(path).name)

    def warn(self, message: str) -> None:
        logger.warning("Run warning", command=self.command, message=message)
        self.warnings.append(message)

    def record_failures(self, failed: Sequence[CellResult], cells: Optional[Sequence[Any]] = None) -> None:
        for r in failed:
            entry = {"index": r.index, "category": r.category, "error": r.error}
            if cells is not None:
                entry["cell"] = cells[r.index]
            self.failed_cells.append(entry)
        if failed:
            self.warn(f"{len(failed)} cell(s) failed")

    def to_dict(self) -> Dict[str, Any]:
        return _jsonable({
            "command": self.command,
            "seed": self.seed,
            "code_version": self.code_version,
            "config": self.config,
            "files": sorted(self.files),
            "results": self.results,
            "warnings": self.warnings,
            "failed_cells": self.failed_cells,
            "written_at": datetime.now(timezone.utc).isoformat(),
        })

    def write(self, out_dir: Union[str, Path]) -> Path:
        target = ensure_dir(out_dir) / MANIFEST_NAME
        target.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        logger.info("Manifest written", path=str(target), files=len(self.files), warnings=len(self.warnings))
        return target


def load_manifest(path: Union[str, Path]) -> Dict[str, Any]:
    target = Path(path)
    if target.is_dir():
        target = target / MANIFEST_NAME
    return json.loads(target.read_text())
