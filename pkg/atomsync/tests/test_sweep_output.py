"""
Standing Wave Sync - Sweep and Output Tests
"""

import json

import numpy as np
import pytest

from atomsync.errors import InsufficientDataError, IntegrationError
from atomsync.services.output_service import (
    MANIFEST_NAME,
    RunManifest,
    load_manifest,
    read_pgm,
    write_csv,
    write_pgm,
)
from atomsync.services.sweep_service import CellStatus, failures, sweep_orchestrator


def square(x):
    return x * x


def fragile(x):
    if x == 3:
        raise InsufficientDataError("cell 3 has no data")
    return x + 0.5


def blows_up(x):
    raise IntegrationError(f"diverged at cell {x}", last_time=2.0 * x)


class TestSweepOrchestrator:
    """Test ordered, fault-tolerant sweeps."""

    def test_empty_sweep(self):
        """Test no cells gives no results."""
        assert sweep_orchestrator(square, []) == []

    def test_results_in_cell_order(self):
        """Test results keep cell order and values."""
        results = sweep_orchestrator(square, list(range(6)))
        assert [r.index for r in results] == list(range(6))
        assert [r.value for r in results] == [0, 1, 4, 9, 16, 25]
        assert all(r.ok for r in results)

    def test_worker_count_does_not_change_output(self):
        """Test one and several workers give identical merged results."""
        cells = list(range(20))
        serial = [r.value for r in sweep_orchestrator(square, cells, workers=1)]
        parallel = [r.value for r in sweep_orchestrator(square, cells, workers=3)]
        assert serial == parallel

    @pytest.mark.parametrize("workers", [1, 2])
    def test_failing_cell_is_recorded(self, workers):
        """Test an injected failure is captured and the other cells complete."""
        results = sweep_orchestrator(fragile, list(range(6)), workers=workers)
        failed = failures(results)
        assert len(failed) == 1
        assert failed[0].index == 3
        assert failed[0].status is CellStatus.FAILED
        assert failed[0].category == "insufficient_data"
        assert [r.value for r in results if r.ok] == [0.5, 1.5, 2.5, 4.5, 5.5]

    @pytest.mark.parametrize("workers", [1, 2])
    def test_failure_keeps_last_time(self, workers):
        """Test an integration failure records its category and last accepted time."""
        results = sweep_orchestrator(blows_up, [1.0, 4.0], workers=workers)
        assert [r.category for r in results] == ["integration", "integration"]
        assert [r.last_time for r in results] == [2.0, 8.0]
        assert sweep_orchestrator(fragile, [3])[0].last_time is None


class TestOutputWriters:
    """Test CSV, PGM and manifest writers."""

    def test_csv_header_and_format(self, tmp_path):
        """Test fixed header and stable float format."""
        path = write_csv(tmp_path / "t.csv", ["n", "v"], [(1.0, 0.1), (2.0, 1.0 / 3.0)])
        lines = path.read_text().splitlines()
        assert lines[0] == "n,v"
        assert lines[1] == "1,0.1"
        assert lines[2] == "2,0.333333333333"

    def test_csv_is_reproducible(self, tmp_path):
        """Test identical rows give byte-identical files."""
        rows = [(float(i), np.sin(i)) for i in range(50)]
        a = write_csv(tmp_path / "a.csv", ["x", "y"], rows).read_bytes()
        b = write_csv(tmp_path / "b.csv", ["x", "y"], rows).read_bytes()
        assert a == b

    def test_pgm_layout(self, tmp_path):
        """Test the binary greyscale image keeps shape and values."""
        shades = np.array([[0, 70, 110], [140, 200, 255]], dtype=np.uint8)
        path = write_pgm(tmp_path / "img.pgm", shades)
        assert path.read_bytes().startswith(b"P5\n3 2\n255\n")
        assert np.array_equal(read_pgm(path), shades)

    def test_pgm_needs_2d(self, tmp_path):
        """Test 1-D input is refused."""
        with pytest.raises(ValueError):
            write_pgm(tmp_path / "bad.pgm", np.zeros(4))

    def test_manifest_contents(self, tmp_path):
        """Test the manifest echoes config, seed, files, warnings and failures."""
        manifest = RunManifest("sync-map", {"params": {"n": 3000.0}}, seed=7, code_version="1.0.0")
        manifest.add_file(tmp_path / "map.csv")
        manifest.results["lambda"] = np.float64(0.5)
        manifest.results["bad"] = float("nan")
        failed = sweep_orchestrator(fragile, [3])
        manifest.record_failures(failed, cells=[(3000.0, 24.0)])
        path = manifest.write(tmp_path)

        assert path.name == MANIFEST_NAME
        data = load_manifest(tmp_path)
        assert data == json.loads(path.read_text())
        assert data["command"] == "sync-map"
        assert data["seed"] == 7
        assert data["code_version"] == "1.0.0"
        assert data["files"] == ["map.csv"]
        assert data["results"]["lambda"] == 0.5
        assert data["results"]["bad"] == "nan"
        assert data["failed_cells"][0]["cell"] == [3000.0, 24.0]
        assert data["warnings"] == ["1 cell(s) failed"]
