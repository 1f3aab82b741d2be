"""
Standing Wave Sync - Attractor Classification Tests
"""

import numpy as np
import pytest

from atomsync.models import ReducedState, SystemParams
from atomsync.services.cycles_service import (
    AttractorLabel,
    BifurcationRecord,
    ClassifierSettings,
    LabelKind,
    _cyclic,
    bifurcation_scan,
    branch_count,
    classify_attractor,
    cluster_window,
    n_grid,
    section_coordinates,
    synchronization_map,
)
from atomsync.services.integrator_service import IntegratorConfig


class TestLabels:
    """Test attractor labels and category codes."""

    def test_category_codes(self):
        """Test the map legend codes."""
        assert AttractorLabel.periodic(1).category == "1"
        assert AttractorLabel.periodic(3).category == "3"
        assert AttractorLabel.periodic(7).category == "4-12"
        assert AttractorLabel.chaotic(0.9).category == "chaos"
        assert AttractorLabel.unresolved("x").category == "unresolved"

    def test_display(self):
        """Test Period(m), Chaotic(λ) and Unresolved strings."""
        assert str(AttractorLabel.periodic(3)) == "Period(3)"
        assert str(AttractorLabel.chaotic(1.04)).startswith("Chaotic(1.04")
        assert str(AttractorLabel.unresolved("no data")) == "Unresolved"

    def test_to_dict(self):
        """Test diagnostics are exported."""
        data = AttractorLabel.periodic(2, cluster_count=2, transient=2000.0).to_dict()
        assert data["label"] == "Period(2)"
        assert data["cluster_count"] == 2
        assert data["transient"] == 2000.0


class TestClustering:
    """Test section clustering and the cyclic order check."""

    def setup_method(self):
        """Setup test fixtures."""
        self.centres = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

    def test_three_cycle(self):
        """Test a repeated 3-point sequence forms three clusters in cyclic order."""
        rng = np.random.default_rng(5)
        coords = np.vstack([self.centres] * 20) + rng.normal(scale=1e-5, size=(60, 2))
        win = cluster_window(coords, eps=1e-3)
        assert win.count == 3
        assert win.points == 60
        assert list(win.sequence[:3]) == [0, 1, 2]
        assert _cyclic(win.sequence, 3)
        assert np.allclose(win.centers, self.centres, atol=1e-4)

    def test_broken_order_is_not_cyclic(self):
        """Test a sequence that changes its visiting order fails the check."""
        seq = np.array([0, 1, 2, 0, 1, 2, 0, 2, 1, 0, 2, 1])
        assert not _cyclic(seq, 3)

    def test_short_sequence_is_not_cyclic(self):
        """Test fewer than two full cycles cannot confirm an order."""
        assert not _cyclic(np.array([0, 1, 2, 0]), 3)

    def test_empty_window(self):
        """Test no points give no clusters."""
        win = cluster_window(np.empty((0, 5)), eps=1e-3)
        assert win.count == 0

    def test_section_coordinates(self):
        """Test u is dropped and ξ becomes (cos ξ, sin ξ)."""
        out = section_coordinates(np.array([[0.0, 60.0, 0.0, -2.0, -0.5]]))
        assert np.allclose(out, [[60.0, -2.0, -0.5, 1.0, 0.0]])


class TestClassification:
    """Test classification on trajectories without section crossings."""

    def setup_method(self):
        """Setup test fixtures."""
        self.cfg = IntegratorConfig(sample_interval=0.1)
        self.settings = ClassifierSettings(transient=10.0, window=10.0)
        self.free = SystemParams(alpha=0.01, delta=0.0, n=3000.0, gamma_a=0.3)

    def test_no_crossings_is_unresolved(self):
        """Test u ≡ 0 never crosses the section."""
        label = classify_attractor(self.free, ReducedState(p=60.0), self.cfg, self.settings)
        assert label.kind is LabelKind.UNRESOLVED
        assert label.reason == "no section crossings"

    def test_sync_map_grid(self):
        """Test map rows run over n then δ and failures are empty."""
        smap = synchronization_map(self.free, [100.0, 200.0], [0.0], ReducedState(p=60.0),
                                   self.cfg, self.settings)
        assert smap.categories().shape == (2, 1)
        assert smap.rows() == [(100.0, 0.0, "unresolved"), (200.0, 0.0, "unresolved")]
        assert smap.failed == []

    def test_sync_map_independent_of_workers(self):
        """Test one and two workers give identical maps."""
        args = (self.free, [100.0, 200.0], [0.0], ReducedState(p=60.0), self.cfg, self.settings)
        assert synchronization_map(*args, workers=1).rows() == synchronization_map(*args, workers=2).rows()

    def test_bifurcation_scan_without_crossings(self):
        """Test each n gets a record with no section values and an unresolved label."""
        records = bifurcation_scan(self.free, [100.0, 200.0, 300.0], ReducedState(p=60.0),
                                   self.cfg, self.settings, workers=2)
        assert [r.n for r in records] == [100.0, 200.0, 300.0]
        assert all(len(r.v_values) == 0 for r in records)
        assert all(r.label.kind is LabelKind.UNRESOLVED and not r.failed for r in records)
        assert branch_count(records) == 0


class TestBifurcationHelpers:
    """Test the n grid and branch counting."""

    def test_n_grid(self):
        """Test inclusive linear grids."""
        grid = n_grid(3000.0, 24000.0, 85)
        assert grid[0] == 3000.0
        assert grid[-1] == 24000.0
        assert len(grid) == 85
        with pytest.raises(ValueError):
            n_grid(0.0, 1.0, 0)

    def test_branch_count(self):
        """Test pooled v-values split at large gaps into branches."""
        p1 = AttractorLabel.periodic(1)
        records = [
            BifurcationRecord(n=1.0, v_values=np.array([-10.0, -10.01]), label=p1),
            BifurcationRecord(n=2.0, v_values=np.array([-5.0]), label=p1),
            BifurcationRecord(n=3.0, v_values=np.array([-1.0, -2.0, -3.0]), label=AttractorLabel.periodic(3)),
        ]
        assert branch_count(records, period=1) == 2
        assert branch_count(records, period=3) == 3
        assert branch_count(records, period=None) == 5
        assert branch_count([], period=1) == 0
