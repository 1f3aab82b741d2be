"""
Standing Wave Sync - Basin Commands
"""

import click
import numpy as np
import structlog

from atomsync.commands.base import RunContext, experiment_options, run_command
from atomsync.services.basins_service import basin_map, refine_window, riddling_indicator
from atomsync.services.output_service import write_csv, write_pgm

logger = structlog.get_logger(__name__)


def _basins(run: RunContext) -> str:
    exp = run.exp
    section = exp.command
    grid = basin_map(
        exp.params,
        z0_range=(section.z0_min, section.z0_max),
        p0_range=(section.p0_min, section.p0_max),
        dims=(section.z0_steps, section.p0_steps),
        cfg=exp.integrator,
        settings=exp.classifier,
        workers=run.workers,
    )
    write_csv(run.path("basins.csv"), ["z0", "p0", "label"], grid.rows())
    # highest z0 on the top row, p0 increasing to the right
    write_pgm(run.path("basins.pgm"), np.flipud(grid.shades()))
    run.manifest.record_failures(grid.failed)

    refined = None
    if section.refine:
        refined = refine_window(
            exp.params, grid,
            z0_range=(section.refine_z0_min, section.refine_z0_max),
            p0_range=(section.refine_p0_min, section.refine_p0_max),
            factor=section.refine_factor,
            cfg=exp.integrator, settings=exp.classifier, workers=run.workers,
        )
        write_csv(run.path("basins_refined.csv"), ["z0", "p0", "label"], refined.rows())
        write_pgm(run.path("basins_refined.pgm"), np.flipud(refined.shades()))
        run.manifest.record_failures(refined.failed)

    report = riddling_indicator(grid, refined)
    results = run.manifest.results
    results["labels"] = grid.distinct_labels()
    results["mixing_fraction"] = report.overall
    results["mixing_by_label"] = report.per_label
    if refined is not None:
        results["refined_labels"] = refined.distinct_labels()
        results["refined_mixing_fraction"] = report.refined_overall
        results["persistence"] = report.persistence
    return f"basins: {len(grid.distinct_labels())} label(s), mixing fraction {report.overall:.3f}"


@click.command("basins")
@experiment_options
@click.pass_context
def basins(ctx, config_path, overrides, workers, seed, out_dir):
    """Attractor label for every initial (z0, p0)."""
    run_command(ctx, "basins", _basins, config_path, overrides, workers, seed, out_dir)


commands = [basins]
