"""
Standing Wave Sync - Fluorescence Spectra Tests
"""

import numpy as np
import pytest

from atomsync.errors import InsufficientDataError, ResolutionError
from atomsync.models import SystemParams
from atomsync.services.dynamics_service import period1_trapped_solution, trap_frequency
from atomsync.services.integrator_service import SystemKind, Trajectory
from atomsync.services.spectra_service import (
    Peak,
    PeakSet,
    comb_fraction,
    extract_sidebands,
    fluorescence_spectrum,
    is_isolated_comb,
    parity_suppression,
    power_at_offsets,
    spectrum_from_signal,
)


def dipole_components(a, b):
    """(u, v) whose lab-frame signal is a cos ωt − b sin ωt."""
    return 0.5 * (a + b), 0.5 * (b - a)


class TestSpectrum:
    """Test periodograms of synthetic dipole envelopes."""

    def setup_method(self):
        """Setup test fixtures."""
        self.t = np.arange(0.0, 1000.0 + 1e-9, 0.05)

    def test_two_sidebands(self):
        """Test an envelope e^{2it} + 0.5 e^{-2it} gives lines at ±2 with 4:1 power."""
        u, v = dipole_components(1.5 * np.cos(2.0 * self.t), 0.5 * np.sin(2.0 * self.t))
        sp = spectrum_from_signal(self.t, u, v, band=4.0)
        assert sp.carrier == pytest.approx(256.0)
        assert sp.resolution == pytest.approx(2.0 * np.pi / 1000.0, rel=1e-2)

        ps = extract_sidebands(sp)
        offsets = np.sort(ps.offsets())
        assert len(ps) == 2
        assert offsets[0] == pytest.approx(-2.0, abs=0.01)
        assert offsets[1] == pytest.approx(2.0, abs=0.01)
        assert ps.spacing == pytest.approx(4.0, abs=0.02)
        upper = [p for p in ps.peaks if p.offset > 0][0]
        lower = [p for p in ps.peaks if p.offset < 0][0]
        assert upper.power > lower.power

    def test_power_at_offsets(self):
        """Test nearest-bin power reads the sideband peaks and the dark gap between them."""
        u, v = dipole_components(1.5 * np.cos(2.0 * self.t), 0.5 * np.sin(2.0 * self.t))
        sp = spectrum_from_signal(self.t, u, v, band=4.0)
        ps = extract_sidebands(sp)
        upper = max(p.power for p in ps.peaks)
        at_lines, off_line = power_at_offsets(sp, [2.0, -2.0]), power_at_offsets(sp, [3.0])
        assert at_lines[0] == pytest.approx(upper)
        assert at_lines[0] / at_lines[1] == pytest.approx(4.0, rel=0.05)
        assert off_line[0] < 1e-3 * upper

    def test_discrete_lines_form_isolated_comb(self):
        """Test two clean sidebands hold nearly all in-band power."""
        u, v = dipole_components(1.5 * np.cos(2.0 * self.t), 0.5 * np.sin(2.0 * self.t))
        sp = spectrum_from_signal(self.t, u, v, band=4.0)
        ps = extract_sidebands(sp)
        assert comb_fraction(sp, ps) > 0.9
        assert is_isolated_comb(sp, ps)

    def test_broadband_noise_is_not_a_comb(self):
        """Test white noise leaves almost no power near detected peaks."""
        rng = np.random.default_rng(3)
        u, v = rng.normal(size=self.t.size), rng.normal(size=self.t.size)
        sp = spectrum_from_signal(self.t, u, v, band=4.0)
        assert not is_isolated_comb(sp, extract_sidebands(sp))

    def test_parseval(self):
        """Test summed density equals the windowed signal energy."""
        u, v = dipole_components(1.5 * np.cos(2.0 * self.t), 0.5 * np.sin(2.0 * self.t))
        sp = spectrum_from_signal(self.t, u, v, band=4.0)
        assert sp.total_power() == pytest.approx(sp.windowed_energy, rel=1e-2)

    def test_zero_signal(self):
        """Test u = v = 0 has no power and no peaks."""
        zeros = np.zeros_like(self.t)
        sp = spectrum_from_signal(self.t, zeros, zeros)
        assert np.all(sp.power == 0.0)
        assert len(extract_sidebands(sp)) == 0

    def test_short_record(self):
        """Test records shorter than 32 periods of the slowest line are refused."""
        t = np.arange(0.0, 100.0, 0.05)
        with pytest.raises(ResolutionError):
            spectrum_from_signal(t, np.cos(t), np.sin(t))

    def test_too_few_samples(self):
        """Test fewer than four samples raise InsufficientDataError."""
        with pytest.raises(InsufficientDataError):
            spectrum_from_signal(np.arange(3.0), np.zeros(3), np.zeros(3))

    def test_trajectory_input(self):
        """Test the trajectory wrapper reads u and v after t_start."""
        u, v = dipole_components(np.cos(0.5 * self.t), np.zeros_like(self.t))
        states = np.column_stack((np.zeros_like(self.t), np.zeros_like(self.t), u, v, -np.ones_like(self.t)))
        traj = Trajectory(system=SystemKind.REDUCED, times=self.t, states=states)
        sp = fluorescence_spectrum(traj, SystemParams(), t_start=100.0)
        ps = extract_sidebands(sp)
        assert np.allclose(np.sort(np.abs(ps.offsets())), [0.5, 0.5], atol=0.01)


class TestParity:
    """Test even/odd sideband suppression."""

    def setup_method(self):
        """Setup test fixtures."""
        t = np.arange(0.0, 1000.0 + 1e-9, 0.05)
        u, v = dipole_components(2.0 * np.cos(t) + 0.1 * np.cos(2.0 * t), np.zeros_like(t))
        self.sp = spectrum_from_signal(t, u, v, band=3.0)
        self.ps = extract_sidebands(self.sp)

    def test_even_orders_suppressed(self):
        """Test weak even multiples give a small even/odd ratio."""
        report = parity_suppression(self.ps, base=1.0, spectrum=self.sp)
        assert report.conclusive
        assert report.ratio < 0.1
        assert report.orders[:2] == [1, 2]

    def test_from_peaks_only(self):
        """Test the peak-list path agrees when four lines are detected."""
        assert len(self.ps) == 4
        report = parity_suppression(self.ps, base=1.0)
        assert report.conclusive
        assert report.ratio < 0.1
        assert report.orders == [1, 2]

    def test_non_positive_base(self):
        """Test a zero base spacing is inconclusive."""
        report = parity_suppression(self.ps, base=0.0, spectrum=self.sp)
        assert not report.conclusive
        assert report.ratio is None

    def test_too_few_peaks(self):
        """Test fewer than four peaks without a spectrum is inconclusive."""
        ps = PeakSet(peaks=[Peak(1.0, 1.0, 0.01), Peak(-1.0, 1.0, 0.01)], spacing=2.0, floor=0.0, threshold=0.1)
        report = parity_suppression(ps, base=1.0)
        assert not report.conclusive
        assert report.reason == "only 2 peaks"

    def test_trapped_cycle_has_no_second_harmonic(self):
        """Test the closed-form trapped cycle keeps ±2ω_ξ more than 30 dB below ±ω_ξ."""
        prm = SystemParams(alpha=0.01, delta=24.0, n=3000.0, gamma_a=0.3)
        omega = trap_frequency(prm)
        t = np.arange(0.0, 1200.0 + 1e-9, 0.05)
        states = [period1_trapped_solution(tau, 0.05, prm).state for tau in t]
        u = np.array([s.u for s in states])
        v = np.array([s.v for s in states])
        sp = spectrum_from_signal(t, u, v, band=3.0 * omega)
        first = np.sum(power_at_offsets(sp, [omega, -omega]))
        second = np.sum(power_at_offsets(sp, [2.0 * omega, -2.0 * omega]))
        assert first > 0.0
        assert second < 1e-3 * first
        report = parity_suppression(extract_sidebands(sp), omega, spectrum=sp)
        assert report.conclusive
        assert report.ratio < 1e-3
