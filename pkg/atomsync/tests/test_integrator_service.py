"""
Standing Wave Sync - Integrator Tests
"""

import math

import numpy as np
import pytest

from atomsync.errors import InvalidStateError
from atomsync.models import FullState, ReducedState, SystemParams
from atomsync.services.dynamics_service import conserved_quantities
from atomsync.services.integrator_service import (
    FULL_COLUMNS,
    EventKind,
    EventSpec,
    IntegratorConfig,
    SystemKind,
    integrate,
    make_rhs,
    propagate,
    section_points,
)


class TestFreeFlight:
    """Test integration at resonance where the atom moves uniformly."""

    def setup_method(self):
        """Setup test fixtures."""
        self.prm = SystemParams(alpha=0.01, delta=0.0, n=3000.0, gamma_a=0.3)
        self.cfg = IntegratorConfig(max_tau=1000.0, sample_interval=1.0)

    @pytest.mark.parametrize("p0", [10.0, 50.0, 200.0])
    def test_momentum_constant(self, p0):
        """Test |p(τ) − p0| < 1e-6 over τ = 1000."""
        traj = integrate(SystemKind.REDUCED, ReducedState(p=p0), self.prm, self.cfg)
        assert np.max(np.abs(traj.column("p") - p0)) < 1e-6
        assert traj.final_state[0] == pytest.approx(0.01 * p0 * 1000.0, rel=1e-9)

    def test_sampling_grid(self):
        """Test samples are recorded every sample_interval including both ends."""
        traj = integrate(SystemKind.REDUCED, ReducedState(p=10.0), self.prm, self.cfg)
        assert len(traj) == 1001
        assert traj.times[0] == 0.0
        assert traj.final_time == pytest.approx(1000.0)
        assert not traj.terminated

    def test_rk4_path_agrees(self):
        """Test the fixed-step path reproduces uniform motion."""
        cfg = IntegratorConfig(max_tau=20.0, sample_interval=0.5, method="RK4", fixed_step=0.01)
        traj = integrate(SystemKind.REDUCED, ReducedState(p=50.0), self.prm, cfg)
        assert len(traj) == 41
        assert traj.final_state[0] == pytest.approx(10.0, rel=1e-10)

    def test_node_crossings_located(self):
        """Test node events sit at ξ = π/2 + kπ at the predicted times."""
        cfg = IntegratorConfig(max_tau=100.0, sample_interval=1.0)
        traj = integrate(SystemKind.REDUCED, ReducedState(p=50.0), self.prm, cfg,
                         events=[EventSpec.node_crossing()])
        nodes = traj.events_of(EventKind.NODE_CROSSING)
        assert len(nodes) == 16
        for k, event in enumerate(nodes):
            expected = (0.5 * math.pi + k * math.pi) / 0.5
            assert event.time == pytest.approx(expected, abs=1e-7)
            assert math.cos(event.state[0]) == pytest.approx(0.0, abs=1e-8)

    @pytest.mark.parametrize("method", ["DOP853", "RK4"])
    def test_terminal_detector(self, method):
        """Test a terminal detector stops the run at its crossing."""
        cfg = IntegratorConfig(max_tau=100.0, sample_interval=1.0, method=method, fixed_step=0.01)
        traj = integrate(SystemKind.REDUCED, ReducedState(p=50.0), self.prm, cfg,
                         events=[EventSpec.detector(10.0)])
        assert traj.terminated
        hits = traj.events_of(EventKind.DETECTOR_HIT)
        assert len(hits) == 1
        assert hits[0].time == pytest.approx(20.0, abs=1e-7)
        assert traj.final_time == pytest.approx(20.0, abs=1e-7)

    def test_events_sorted_in_time(self):
        """Test merged events from several specs are in time order."""
        cfg = IntegratorConfig(max_tau=60.0, sample_interval=1.0)
        events = [EventSpec.node_crossing(), EventSpec.detector(25.0, terminal=False)]
        traj = integrate(SystemKind.REDUCED, ReducedState(p=50.0), self.prm, cfg, events=events)
        times = [e.time for e in traj.events]
        assert times == sorted(times)
        assert len(traj.events_of("detector_hit")) == 1


class TestIntegration:
    """Test integration with a field."""

    def setup_method(self):
        """Setup test fixtures."""
        self.prm = SystemParams(alpha=0.01, delta=24.0, n=3000.0, gamma_a=0.3)

    def test_non_finite_initial_state(self):
        """Test NaN initial states are rejected before integrating."""
        with pytest.raises(InvalidStateError):
            integrate(SystemKind.REDUCED, np.array([0.0, np.nan, 0.0, 0.0, -1.0]), self.prm,
                      IntegratorConfig(max_tau=1.0))

    def test_wrong_dimension(self):
        """Test a 7-component state is refused by the reduced system."""
        with pytest.raises(ValueError):
            integrate(SystemKind.REDUCED, FullState(), self.prm, IntegratorConfig(max_tau=1.0))

    def test_section_events_are_rising_u_zeros(self):
        """Test u = 0 section points have u ≈ 0 and u̇ > 0."""
        cfg = IntegratorConfig(max_tau=30.0, sample_interval=0.1)
        spec = EventSpec.section_u0()
        traj = integrate(SystemKind.REDUCED, ReducedState(p=60.0), self.prm, cfg, events=[spec])
        pts = section_points(traj, spec)
        assert len(pts) > 5
        rhs = make_rhs(SystemKind.REDUCED, self.prm)
        for y in pts:
            assert abs(y[2]) < 1e-8
            assert rhs(0.0, y)[2] > 0.0

        negative = section_points(traj, spec, negative_v_only=True)
        assert np.all(negative[:, 3] < 0.0)

    def test_conservative_invariants(self):
        """Test γ_a = 0 keeps both invariants to 1e-6 relative."""
        prm = self.prm.with_updates(gamma_a=0.0, n=500.0)
        cfg = IntegratorConfig(max_tau=200.0, sample_interval=10.0, rel_tol=1e-11, abs_tol=1e-12)
        s0 = ReducedState(xi=0.1, p=40.0, u=0.0, v=0.0, z=-1.0)
        traj = integrate(SystemKind.REDUCED, s0, prm, cfg)
        b0, e0 = conserved_quantities(s0, prm)
        b1, e1 = conserved_quantities(traj.state_at(-1), prm)
        assert abs(b1 - b0) / abs(b0) < 1e-6
        assert abs(e1 - e0) / abs(e0) < 1e-6

    def test_full_system_runs(self):
        """Test the pumped-cavity system integrates with its own columns."""
        prm = SystemParams.from_full(alpha=0.01, delta=24.0, gamma_a=0.3, gamma_f=1.0, E=20.0)
        s0 = FullState.from_reduced(ReducedState(p=60.0), prm)
        traj = integrate(SystemKind.FULL, s0, prm, IntegratorConfig(max_tau=5.0, sample_interval=0.5))
        assert traj.columns == FULL_COLUMNS
        assert traj.states.shape == (11, 7)
        assert traj.state_at(-1).photon_number == pytest.approx(100.0, rel=0.25)

    def test_trajectory_frames(self):
        """Test tabular export has tau first and one row per sample."""
        cfg = IntegratorConfig(max_tau=10.0, sample_interval=1.0)
        traj = integrate(SystemKind.REDUCED, ReducedState(p=60.0), self.prm, cfg,
                         events=[EventSpec.node_crossing()])
        frame = traj.to_frame()
        assert list(frame.columns) == ["tau", "xi", "p", "u", "v", "z"]
        assert len(frame) == len(traj)
        assert list(traj.events_frame().columns)[:2] == ["kind", "tau"]

    def test_samples_read_only(self):
        """Test recorded arrays cannot be modified."""
        traj = integrate(SystemKind.REDUCED, ReducedState(p=60.0), self.prm,
                         IntegratorConfig(max_tau=1.0))
        with pytest.raises(ValueError):
            traj.states[0, 0] = 1.0

    def test_propagate_matches_integrate(self):
        """Test chunked propagation ends where a single integration ends."""
        cfg = IntegratorConfig(max_tau=10.0, sample_interval=None)
        s0 = ReducedState(p=60.0)
        traj = integrate(SystemKind.REDUCED, s0, self.prm, cfg)
        rhs = make_rhs(SystemKind.REDUCED, self.prm)
        y = s0.as_array()
        for k in range(10):
            y = propagate(rhs, y, float(k), float(k + 1), cfg)
        assert np.allclose(y, traj.final_state, rtol=1e-6, atol=1e-6)
