"""
Standing Wave Sync - Chaos Diagnostics Tests
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from atomsync.errors import InsufficientDataError
from atomsync.models import ReducedState, SystemParams
from atomsync.services.chaos_service import (
    LyapunovSettings,
    _separation,
    box_counting_dimension,
    embed,
    lyapunov_map,
    lyapunov_scan,
    max_lyapunov,
)
from atomsync.services.integrator_service import IntegratorConfig


class TestBoxCounting:
    """Test the box-counting dimension on sets of known dimension."""

    def setup_method(self):
        """Setup test fixtures."""
        self.rng = np.random.default_rng(11)

    def test_line_segment(self):
        """Test points on a diagonal segment have dimension one."""
        s = self.rng.uniform(0.0, 1.0, 20000)
        pts = np.column_stack((s, 0.5 * s, 3.0 + 0.0 * s))
        est = box_counting_dimension(pts)
        assert est.dimension == pytest.approx(1.0, abs=0.1)
        assert est.r_squared > 0.99

    def test_filled_square(self):
        """Test uniform points in a square have dimension two."""
        pts = self.rng.uniform(0.0, 1.0, (200000, 2))
        est = box_counting_dimension(pts)
        assert est.dimension == pytest.approx(2.0, abs=0.15)
        assert est.eps_min < est.eps_max

    def test_saturated_scales_are_dropped(self):
        """Test scales where every point has its own box are not fitted."""
        pts = self.rng.uniform(0.0, 1.0, (2000, 2))
        est = box_counting_dimension(pts)
        assert np.all(est.counts < 0.2 * 2000)
        assert len(est.scales) < 10

    def test_single_point(self):
        """Test a degenerate cloud has dimension zero."""
        est = box_counting_dimension(np.zeros((50, 3)))
        assert est.dimension == 0.0

    def test_too_few_scales(self):
        """Test fewer than five scales are refused."""
        with pytest.raises(InsufficientDataError):
            box_counting_dimension(np.random.default_rng(0).uniform(size=(100, 2)), scales=[0.5, 0.25, 0.125])

    def test_empty_cloud(self):
        """Test no points raise InsufficientDataError."""
        with pytest.raises(InsufficientDataError):
            box_counting_dimension(np.empty((0, 2)))


class TestLyapunov:
    """Test the maximal Lyapunov exponent estimator."""

    def setup_method(self):
        """Setup test fixtures."""
        self.cfg = IntegratorConfig(sample_interval=None)
        self.settings = LyapunovSettings(transient=0.0, horizon=100.0, renorm_interval=1.0)

    def test_settings_need_enough_intervals(self):
        """Test horizons shorter than 100 renormalisations are rejected."""
        with pytest.raises(ValidationError):
            LyapunovSettings(horizon=50.0, renorm_interval=1.0)

    def test_separation_uses_chord_for_position(self):
        """Test positions a full wavelength apart are the same point."""
        a = np.array([0.0, 1.0, 0.0, 0.0, -1.0])
        b = a.copy()
        b[0] = 2.0 * math.pi
        assert _separation(a, b) == pytest.approx(0.0, abs=1e-12)
        b[1] = 4.0
        assert _separation(a, b) == pytest.approx(3.0)

    def test_embedding(self):
        """Test states map to (p, u, v, z, cos ξ, sin ξ)."""
        out = embed(np.array([0.0, 60.0, 1.0, 2.0, -0.5]))
        assert out.shape == (1, 6)
        assert np.allclose(out[0], [60.0, 1.0, 2.0, -0.5, 1.0, 0.0])

    def test_free_flight_is_not_chaotic(self):
        """Test resonant motion has a near-zero exponent."""
        prm = SystemParams(alpha=0.01, delta=0.0, n=100.0, gamma_a=0.3)
        est = max_lyapunov(prm, ReducedState(p=50.0), self.cfg, self.settings)
        assert abs(est.lambda_) < 0.1
        assert est.stderr >= 0.0
        assert est.horizon == 100.0

    def test_map_shape_and_rows(self):
        """Test λ grid shape, row order and the single-detuning scan."""
        prm = SystemParams(alpha=0.01, delta=0.0, n=100.0, gamma_a=0.3)
        lmap = lyapunov_map(prm, [0.0, 100.0], [0.0], ReducedState(p=50.0), self.cfg, self.settings)
        assert lmap.lambdas.shape == (2, 1)
        assert [r[:2] for r in lmap.rows()] == [(0.0, 0.0), (100.0, 0.0)]
        assert lmap.failed == []
        scan = lyapunov_scan(prm, [100.0], ReducedState(p=50.0), self.cfg, self.settings)
        assert scan.lambdas.shape == (1, 1)
        assert scan.lambdas[0, 0] == pytest.approx(lmap.lambdas[1, 0])
