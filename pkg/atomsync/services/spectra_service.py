"""
Standing Wave Sync - Spectra Service

Fluorescence power spectra of the lab-frame dipole signal, sideband peak
extraction and the even/odd sideband parity report.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import structlog
from scipy.interpolate import CubicSpline
from scipy.signal import find_peaks, get_window, peak_widths, periodogram

from atomsync.errors import InsufficientDataError, ResolutionError
from atomsync.models import SystemParams
from atomsync.services.integrator_service import SystemKind, Trajectory

logger = structlog.get_logger(__name__)

CARRIER_FACTOR = 64
MIN_PERIODS = 32
DEFAULT_SLOWEST_LINE = 0.25
MIN_BANDWIDTH = 1.0
BANDWIDTH_FRACTION = 0.999


@dataclass
class Spectrum:
    """One-sided periodogram expressed as angular offsets from the carrier."""

    freqs: np.ndarray
    power: np.ndarray
    window: str
    resolution: float
    carrier: float
    band: float
    windowed_energy: float = 0.0

    def in_band(self) -> np.ndarray:
        return np.abs(self.freqs) <= self.band

    def total_power(self) -> float:
        """Σ P·Δf in cycles per unit time; matches windowed_energy (Parseval)."""
        return float(np.sum(self.power) * self.resolution / (2.0 * math.pi))


@dataclass
class Peak:
    offset: float
    power: float
    width: float


@dataclass
class PeakSet:
    peaks: List[Peak]
    spacing: Optional[float]
    floor: float
    threshold: float

    def offsets(self) -> np.ndarray:
        return np.array([p.offset for p in self.peaks])

    def __len__(self) -> int:
        return len(self.peaks)


@dataclass
class ParityReport:
    conclusive: bool
    ratio: Optional[float] = None
    even_power: float = 0.0
    odd_power: float = 0.0
    orders: List[int] = field(default_factory=list)
    reason: Optional[str] = None


def envelope_bandwidth(times: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    """Angular frequency below which BANDWIDTH_FRACTION of the envelope power lies."""
    if len(times) < 4:
        return MIN_BANDWIDTH
    dt = float(np.median(np.diff(times)))
    envelope = (u - v) + 1j * (u + v)
    f, p = periodogram(envelope, fs=1.0 / dt, detrend=False, return_onesided=False)
    total = float(np.sum(p))
    if total == 0.0:
        return MIN_BANDWIDTH
    order = np.argsort(np.abs(f))
    cumulative = np.cumsum(p[order]) / total
    idx = int(np.searchsorted(cumulative, BANDWIDTH_FRACTION))
    idx = min(idx, len(order) - 1)
    return max(2.0 * math.pi * abs(float(f[order][idx])), MIN_BANDWIDTH)


def spectrum_from_signal(
    times: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    carrier: Optional[float] = None,
    window: str = "hann",
    slowest_line: float = DEFAULT_SLOWEST_LINE,
    band: Optional[float] = None,
) -> Spectrum:
    """
    Periodogram of (u − v) cos ωt − (u + v) sin ωt on a uniform grid.

    u and v are spline-resampled finely enough to carry the carrier ω, which
    defaults to CARRIER_FACTOR times the envelope bandwidth.
    """
    times = np.asarray(times, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if len(times) < 4:
        raise InsufficientDataError("Need at least 4 samples for a spectrum")
    duration = float(times[-1] - times[0])
    needed = MIN_PERIODS * 2.0 * math.pi / slowest_line
    if duration < needed:
        raise ResolutionError(
            f"Record of {duration:.4g} is shorter than {MIN_PERIODS} periods of the slowest line ({needed:.4g})"
        )

    half_span = band if band is not None else envelope_bandwidth(times, u, v)
    omega_c = carrier if carrier is not None else CARRIER_FACTOR * half_span
    dt = math.pi / (2.0 * (omega_c + half_span))
    count = int(math.floor(duration / dt)) + 1
    grid = times[0] + dt * np.arange(count)
    u_s = CubicSpline(times, u)(grid)
    v_s = CubicSpline(times, v)(grid)
    phase = omega_c * (grid - times[0])
    signal = (u_s - v_s) * np.cos(phase) - (u_s + v_s) * np.sin(phase)

    f, power = periodogram(signal, fs=1.0 / dt, window=window, detrend=False, scaling="density")
    taper = get_window(window, len(signal))
    energy = float(np.sum((signal * taper) ** 2) / np.sum(taper ** 2))
    resolution = 2.0 * math.pi * float(f[1] - f[0])
    spectrum = Spectrum(
        freqs=2.0 * math.pi * f - omega_c,
        power=power,
        window=window,
        resolution=resolution,
        carrier=omega_c,
        band=half_span,
        windowed_energy=energy,
    )
    logger.debug("Spectrum computed", carrier=omega_c, band=half_span, bins=len(f), resolution=resolution)
    return spectrum


def fluorescence_spectrum(
    traj: Trajectory,
    prm: SystemParams,
    carrier: Optional[float] = None,
    window: str = "hann",
    t_start: float = 0.0,
    slowest_line: float = DEFAULT_SLOWEST_LINE,
) -> Spectrum:
    """Fluorescence spectrum of a recorded trajectory after t_start."""
    mask = traj.times >= t_start
    times = traj.times[mask]
    if traj.system is SystemKind.REDUCED:
        u, v = traj.column("u")[mask], traj.column("v")[mask]
    else:
        e, g = traj.column("e")[mask], traj.column("g")[mask]
        x, y = traj.column("x")[mask], traj.column("y")[mask]
        u, v = 0.5 * (e * x - g * y), 0.5 * (g * x + e * y)
    # a trajectory cut by a terminal event may end off-grid
    keep = np.concatenate(([True], np.diff(times) > 0))
    return spectrum_from_signal(times[keep], u[keep], v[keep], carrier, window, slowest_line)


def extract_sidebands(
    sp: Spectrum,
    threshold_factor: float = 10.0,
    relative_floor: float = 1e-3,
) -> PeakSet:
    """
    Local maxima inside the band that rise above the noise floor.

    The floor is the median in-band power; a peak must exceed
    threshold_factor × floor and relative_floor × the strongest line. Peak
    centres use parabolic interpolation over neighbouring bins.
    """
    band = sp.in_band()
    offsets = sp.freqs[band]
    power = sp.power[band]
    if power.size == 0:
        return PeakSet(peaks=[], spacing=None, floor=0.0, threshold=0.0)
    floor = float(np.median(power))
    threshold = max(threshold_factor * floor, relative_floor * float(power.max()))
    if threshold <= 0.0:
        return PeakSet(peaks=[], spacing=None, floor=floor, threshold=threshold)

    idx, _ = find_peaks(power, height=threshold)
    widths = peak_widths(power, idx, rel_height=0.5)[0] * sp.resolution if idx.size else np.empty(0)

    peaks = []
    for k, i in enumerate(idx):
        shift = 0.0
        if 0 < i < len(power) - 1:
            a, b, c = power[i - 1], power[i], power[i + 1]
            curvature = a - 2.0 * b + c
            if curvature != 0.0:
                shift = 0.5 * (a - c) / curvature
        peaks.append(Peak(offset=float(offsets[i] + shift * sp.resolution), power=float(power[i]),
                          width=float(widths[k])))
    peaks.sort(key=lambda p: (abs(p.offset), p.offset))

    spacing = None
    if len(peaks) >= 2:
        ordered = np.sort([p.offset for p in peaks])
        spacing = float(np.median(np.diff(ordered)))
    return PeakSet(peaks=peaks, spacing=spacing, floor=floor, threshold=threshold)


def power_at_offsets(sp: Spectrum, offsets: Sequence[float], half_width_bins: int = 1) -> np.ndarray:
    """Largest power within ±half_width_bins of the bin nearest each offset."""
    out = np.empty(len(offsets))
    for k, off in enumerate(offsets):
        i = int(np.argmin(np.abs(sp.freqs - off)))
        lo, hi = max(0, i - half_width_bins), min(len(sp.power), i + half_width_bins + 1)
        out[k] = float(np.max(sp.power[lo:hi]))
    return out


def comb_fraction(sp: Spectrum, ps: PeakSet, half_width_bins: int = 2) -> float:
    """Share of in-band power that sits within ±half_width_bins of a detected peak."""
    band = sp.in_band()
    total = float(np.sum(sp.power[band]))
    if total == 0.0 or not len(ps):
        return 0.0
    near = np.zeros(sp.freqs.shape, dtype=bool)
    for peak in ps.peaks:
        i = int(np.argmin(np.abs(sp.freqs - peak.offset)))
        near[max(0, i - half_width_bins):i + half_width_bins + 1] = True
    return float(np.sum(sp.power[near & band])) / total


def is_isolated_comb(sp: Spectrum, ps: PeakSet, min_fraction: float = 0.5) -> bool:
    """Discrete sidebands carry most of the power; broadband chaos fails this."""
    return comb_fraction(sp, ps) >= min_fraction


def parity_suppression(
    ps: PeakSet,
    base: float,
    spectrum: Optional[Spectrum] = None,
    max_order: int = 6,
) -> ParityReport:
    """
    Ratio of sideband power at even multiples of `base` to odd multiples.

    With a spectrum the power is read at ±k·base directly; otherwise at least
    four detected peaks are assigned to their nearest multiple.
    """
    if base <= 0.0:
        return ParityReport(conclusive=False, reason="base spacing must be positive")

    even = odd = 0.0
    orders: List[int] = []
    if spectrum is not None:
        top = max(2, min(max_order, int(spectrum.band // base)))
        for k in range(1, top + 1):
            p = float(np.sum(power_at_offsets(spectrum, [k * base, -k * base])))
            orders.append(k)
            if k % 2:
                odd += p
            else:
                even += p
    else:
        if len(ps) < 4:
            return ParityReport(conclusive=False, reason=f"only {len(ps)} peaks")
        for peak in ps.peaks:
            k = int(round(abs(peak.offset) / base))
            if k < 1 or k > max_order or abs(abs(peak.offset) - k * base) > 0.25 * base:
                continue
            orders.append(k)
            if k % 2:
                odd += peak.power
            else:
                even += peak.power
        orders = sorted(set(orders))

    if odd == 0.0:
        return ParityReport(conclusive=False, even_power=even, odd_power=odd, orders=orders,
                            reason="no power at odd multiples")
    return ParityReport(conclusive=True, ratio=even / odd, even_power=even, odd_power=odd, orders=orders)
