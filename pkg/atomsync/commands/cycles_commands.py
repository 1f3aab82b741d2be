"""
Standing Wave Sync - Cycle Commands

`cycle-classify`, `bifurcation` and `sync-map`.
"""

import click
import numpy as np
import structlog

from atomsync.commands.base import RunContext, experiment_options, run_command
from atomsync.models import NoiseSpec
from atomsync.services.cycles_service import (
    branch_count,
    bifurcation_scan,
    n_grid,
    observe_attractor,
    synchronization_map,
)
from atomsync.services.integrator_service import SystemKind, integrate
from atomsync.services.observables_service import peak_force
from atomsync.services.output_service import write_csv

logger = structlog.get_logger(__name__)


def _cycle_classify(run: RunContext) -> str:
    exp = run.exp
    label, pts = observe_attractor(exp.params, exp.initial.state(), exp.integrator, exp.classifier, exp.noise)
    write_csv(run.path("section_points.csv"), ["xi", "p", "u", "v", "z"], pts.tolist())
    run.manifest.results["label"] = str(label)
    run.manifest.results["attractor"] = label.to_dict()
    run.manifest.results["section_points"] = len(pts)
    return str(label)


def _calibrated_noise(run: RunContext) -> NoiseSpec:
    """Weak noise scaled to the peak force of the unperturbed base run."""
    exp = run.exp
    horizon = exp.classifier.transient + 2.0 * exp.classifier.window
    cfg = exp.integrator.model_copy(update={"max_tau": horizon})
    traj = integrate(SystemKind.REDUCED, exp.initial.state(), exp.params, cfg)
    peak = peak_force(traj, after=exp.classifier.transient)
    noise = NoiseSpec.calibrated(peak, exp.command.noise_fraction, seed=exp.run.seed)
    logger.info("Noise calibrated", peak_force=peak, amplitude=noise.amplitude)
    return noise


def _bifurcation(run: RunContext) -> str:
    exp = run.exp
    section = exp.command
    noise = exp.noise
    if noise is None and section.noise_fraction > 0:
        noise = _calibrated_noise(run)
    if noise is not None:
        run.manifest.results["noise"] = noise.model_dump()

    grid = n_grid(section.n_min, section.n_max, section.n_steps)
    records = bifurcation_scan(
        exp.params, grid, exp.initial.state(), exp.integrator, exp.classifier, noise, workers=run.workers,
    )
    write_csv(run.path("bifurcation.csv"), ["n", "v"],
              [(r.n, float(v)) for r in records for v in r.v_values])
    write_csv(run.path("bifurcation_labels.csv"), ["n", "label", "category"],
              [(r.n, str(r.label), r.label.category) for r in records])

    categories = [r.label.category for r in records]
    counts = {code: categories.count(code) for code in sorted(set(categories))}
    results = run.manifest.results
    results["label_counts"] = counts
    results["period1_branches"] = branch_count(records, period=1)
    results["period3_branches"] = branch_count(records, period=3)
    chaotic = [r.n for r in records if r.label.category == "chaos"]
    results["first_chaotic_n"] = chaotic[0] if chaotic else None

    failed = [{"n": r.n, "error": r.label.reason} for r in records if r.failed]
    run.manifest.failed_cells.extend(failed)
    if failed:
        run.manifest.warn(f"{len(failed)} scan point(s) failed and were labelled unresolved")
    return f"bifurcation scan: {len(records)} values of n, labels {counts}"


def grid_axes(section):
    n_values = n_grid(section.n_min, section.n_max, section.n_steps)
    delta_values = np.linspace(section.delta_min, section.delta_max, section.delta_steps)
    return n_values, delta_values


def _sync_map(run: RunContext) -> str:
    exp = run.exp
    n_values, delta_values = grid_axes(exp.command)
    smap = synchronization_map(
        exp.params, n_values, delta_values, exp.initial.state(), exp.integrator, exp.classifier,
        workers=run.workers,
    )
    write_csv(run.path("map.csv"), ["n", "delta", "label"], smap.rows())
    cats = smap.categories().ravel().tolist()
    run.manifest.results["label_counts"] = {code: cats.count(code) for code in sorted(set(cats))}
    run.manifest.record_failures(smap.failed, [(float(n), float(d)) for n in n_values for d in delta_values])
    return f"sync map: {len(n_values)}x{len(delta_values)} cells"


@click.command("cycle-classify")
@experiment_options
@click.pass_context
def cycle_classify(ctx, config_path, overrides, workers, seed, out_dir):
    """Label the attractor reached from the initial state."""
    run_command(ctx, "cycle-classify", _cycle_classify, config_path, overrides, workers, seed, out_dir)


@click.command("bifurcation")
@experiment_options
@click.pass_context
def bifurcation(ctx, config_path, overrides, workers, seed, out_dir):
    """Section v-values against photon number n."""
    run_command(ctx, "bifurcation", _bifurcation, config_path, overrides, workers, seed, out_dir)


@click.command("sync-map")
@experiment_options
@click.pass_context
def sync_map(ctx, config_path, overrides, workers, seed, out_dir):
    """Attractor category on the (n, delta) plane."""
    run_command(ctx, "sync-map", _sync_map, config_path, overrides, workers, seed, out_dir)


commands = [cycle_classify, bifurcation, sync_map]
