"""
Standing Wave Sync - Exit Scan Command

Exit time against n or δ, recursive refinement of singular intervals and
the fractal verdict.
"""

from dataclasses import asdict

import click
import numpy as np
import structlog

from atomsync.commands.base import RunContext, experiment_options, run_command
from atomsync.services.output_service import write_csv
from atomsync.services.scattering_service import (
    ExitExperiment,
    OutcomeKind,
    ScanAxis,
    exit_scan,
    fractal_signature,
    refine_singular,
)

logger = structlog.get_logger(__name__)


def _exit_scan(run: RunContext) -> str:
    exp = run.exp
    section = exp.command
    template = ExitExperiment(
        prm=exp.params,
        detector_span=section.detector_span,
        p0=section.p0,
        z0=exp.initial.z,
        tau_max=section.tau_max,
    )
    axis = ScanAxis(section.axis)
    values = np.linspace(section.start, section.stop, section.steps)
    scan = exit_scan(
        axis, values, template=template, cfg=exp.integrator,
        threshold_factor=section.threshold_factor, max_flagged=section.max_flagged, workers=run.workers,
    )
    write_csv(run.path("scan.csv"), ["param", "T", "outcome"],
              [(x, T, kind) for level, _, x, T, kind in scan.rows() if level == 0])

    scan = refine_singular(scan, section.depth, zoom=section.zoom, max_flagged=section.max_flagged,
                           workers=run.workers)
    write_csv(run.path("refinement.csv"), ["level", "parent_interval", "param", "T", "outcome"], scan.rows())
    stats = [asdict(lvl.stats) for lvl in scan.levels if lvl.stats is not None]
    if stats:
        write_csv(run.path("levels.csv"), list(stats[0]), [tuple(s.values()) for s in stats])

    report = fractal_signature(scan)
    results = run.manifest.results
    results["axis"] = axis.value
    results["threshold"] = scan.threshold
    results["verdict"] = report.verdict.value
    results["verdict_reason"] = report.reason
    results["flagged_per_level"] = [s["flagged"] for s in stats]

    failed = [o for lvl in scan.levels for o in lvl.outcomes if o.kind is OutcomeKind.FAILED]
    if failed:
        run.manifest.warn(f"{len(failed)} scan point(s) failed to integrate")
    return f"exit scan along {axis.value}: {report.verdict.value}"


@click.command("exit-scan")
@experiment_options
@click.pass_context
def exit_scan_command(ctx, config_path, overrides, workers, seed, out_dir):
    """Exit-time scan with singular-interval refinement."""
    run_command(ctx, "exit-scan", _exit_scan, config_path, overrides, workers, seed, out_dir)


commands = [exit_scan_command]
