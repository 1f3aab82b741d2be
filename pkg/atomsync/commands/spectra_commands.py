"""
Standing Wave Sync - Spectrum Command

Fluorescence spectrum of the post-transient trajectory, its sideband comb
and the even/odd suppression test.
"""

import click
import structlog

from atomsync.commands.base import RunContext, experiment_options, run_command
from atomsync.errors import NoTrappedOscillationError
from atomsync.services.dynamics_service import trap_frequency
from atomsync.services.integrator_service import SystemKind, integrate
from atomsync.services.output_service import write_csv
from atomsync.services.spectra_service import (
    comb_fraction,
    extract_sidebands,
    fluorescence_spectrum,
    is_isolated_comb,
    parity_suppression,
)

logger = structlog.get_logger(__name__)


def _spectrum(run: RunContext) -> str:
    exp = run.exp
    section = exp.command
    traj = integrate(SystemKind.REDUCED, exp.initial.state(), exp.params, exp.integrator, noise=exp.noise)
    sp = fluorescence_spectrum(
        traj, exp.params, carrier=section.carrier, window=section.window,
        t_start=section.transient, slowest_line=section.slowest_line,
    )
    band = sp.in_band()
    write_csv(run.path("spectrum.csv"), ["freq_offset", "power"],
              zip(sp.freqs[band].tolist(), sp.power[band].tolist()))

    peaks = extract_sidebands(sp, threshold_factor=section.threshold_factor)
    write_csv(run.path("peaks.csv"), ["offset", "power"], [(pk.offset, pk.power) for pk in peaks.peaks])

    results = run.manifest.results
    results["carrier"] = sp.carrier
    results["resolution"] = sp.resolution
    results["band"] = sp.band
    results["total_power"] = sp.total_power()
    results["windowed_energy"] = sp.windowed_energy
    results["peaks"] = len(peaks)
    results["spacing"] = peaks.spacing
    results["comb_fraction"] = comb_fraction(sp, peaks)
    results["isolated_comb"] = is_isolated_comb(sp, peaks)

    base = section.base
    if base is None:
        try:
            base = trap_frequency(exp.params)
        except NoTrappedOscillationError as e:
            run.manifest.warn(f"No sideband base: {e}")
    if base:
        parity = parity_suppression(peaks, base, spectrum=sp)
        results["parity"] = {
            "base": base,
            "conclusive": parity.conclusive,
            "ratio": parity.ratio,
            "even_power": parity.even_power,
            "odd_power": parity.odd_power,
            "orders": parity.orders,
            "reason": parity.reason,
        }
    return f"spectrum: {len(peaks)} peak(s), spacing {peaks.spacing}"


@click.command("spectrum")
@experiment_options
@click.pass_context
def spectrum(ctx, config_path, overrides, workers, seed, out_dir):
    """Fluorescence spectrum and sideband analysis."""
    run_command(ctx, "spectrum", _spectrum, config_path, overrides, workers, seed, out_dir)


commands = [spectrum]
