"""
Standing Wave Sync - Command Line Tests
"""

import json
from unittest.mock import patch

import numpy as np
import pandas as pd
from click.testing import CliRunner

from atomsync.cli import create_cli
from atomsync.commands.base import EXIT_LIBRARY, EXIT_USAGE
from atomsync.errors import ParameterError
from atomsync.config import TestingSettings

RESONANT = ["--set", "params.delta=0", "--set", "params.n=3000"]

EXIT_SCAN_INI = """
[params]
delta = 0
n = 3000

[command]
axis = n
start = 1000
stop = 2000
steps = 5
tau_max = 100
depth = 1
zoom = 2
"""


class TestCli:
    """Test the atomsync command line."""

    def setup_method(self):
        """Setup test fixtures."""
        self.runner = CliRunner()
        self.cli = create_cli(TestingSettings())

    def invoke(self, *args):
        return self.runner.invoke(self.cli, list(args), obj={})

    def test_help_lists_commands(self):
        """Test every subcommand is registered."""
        result = self.invoke("--help")
        assert result.exit_code == 0
        for name in ("simulate", "friction", "cycle-classify", "bifurcation", "sync-map",
                     "lyapunov", "lyapunov-map", "basins", "spectrum", "exit-scan"):
            assert name in result.output

    def test_simulate_free_flight(self, tmp_path):
        """Test simulate at resonance writes a constant-momentum trajectory and a manifest."""
        out = tmp_path / "sim"
        result = self.invoke("simulate", *RESONANT, "--set", "integrator.max_tau=20",
                             "--set", "integrator.sample_interval=1", "--out", str(out))
        assert result.exit_code == 0, result.output

        frame = pd.read_csv(out / "trajectory.csv")
        assert list(frame.columns) == ["tau", "xi", "p", "u", "v", "z"]
        assert len(frame) == 21
        assert np.allclose(frame["p"], 60.0, atol=1e-6)

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert "trajectory.csv" in manifest["files"]
        assert manifest["config"]["params"]["delta"] == 0.0

    def test_invalid_override(self, tmp_path):
        """Test unknown keys are usage errors."""
        result = self.invoke("simulate", "--set", "params.bogus=1", "--out", str(tmp_path))
        assert result.exit_code == EXIT_USAGE

    def test_missing_config_file(self, tmp_path):
        """Test a config path that does not exist is a usage error."""
        result = self.invoke("simulate", "--config", str(tmp_path / "none.ini"))
        assert result.exit_code == EXIT_USAGE

    def test_library_error_exit_code(self, tmp_path):
        """Test a record too short for a spectrum exits with the library code and a manifest."""
        result = self.invoke("spectrum", *RESONANT, "--set", "integrator.max_tau=100",
                             "--set", "command.transient=0", "--out", str(tmp_path))
        assert result.exit_code == EXIT_LIBRARY
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["results"]["error"]["category"] == "resolution"

    def test_collapsed_refine_grid_is_usage_error(self, tmp_path):
        """Test refining a basin grid with one z0 row is refused before any run."""
        result = self.invoke("basins", "--set", "command.z0_min=0.5", "--set", "command.z0_max=0.5",
                             "--set", "command.refine=true", "--out", str(tmp_path))
        assert result.exit_code == EXIT_USAGE
        assert not (tmp_path / "manifest.json").exists()

    def test_service_parameter_error_exit_code(self, tmp_path):
        """Test a rejected service argument exits with the usage code and a config category."""
        with patch("atomsync.commands.basins_commands.basin_map",
                   side_effect=ParameterError("Basin grids need at least 2x2 cells")):
            result = self.invoke("basins", "--out", str(tmp_path))
        assert result.exit_code == EXIT_USAGE
        error = json.loads((tmp_path / "manifest.json").read_text())["results"]["error"]
        assert error["category"] == "config"
        assert "2x2" in error["message"]

    def test_plain_value_error_exit_code(self, tmp_path):
        """Test a bare ValueError from a service is reported, not raised as a traceback."""
        with patch("atomsync.commands.basins_commands.basin_map", side_effect=ValueError("empty window")):
            result = self.invoke("basins", "--out", str(tmp_path))
        assert result.exit_code == EXIT_USAGE
        assert result.exception is None or isinstance(result.exception, SystemExit)
        error = json.loads((tmp_path / "manifest.json").read_text())["results"]["error"]
        assert error == {"category": "config", "message": "empty window"}

    def test_exit_scan_reproducible(self, tmp_path):
        """Test reruns with different worker counts give byte-identical tables."""
        config = tmp_path / "scan.ini"
        config.write_text(EXIT_SCAN_INI)
        first, second = tmp_path / "a", tmp_path / "b"
        assert self.invoke("exit-scan", "--config", str(config), "--out", str(first)).exit_code == 0
        assert self.invoke("exit-scan", "--config", str(config), "--workers", "2",
                           "--out", str(second)).exit_code == 0
        for name in ("scan.csv", "refinement.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

        scan = pd.read_csv(first / "scan.csv")
        assert len(scan) == 5
        assert np.allclose(scan["T"], 4.0 * np.pi, rtol=1e-4)
