"""
Standing Wave Sync - Chaos Commands

`lyapunov` (single estimate, optional box-counting dimension of the
attractor) and `lyapunov-map` (λ on the (n, δ) plane).
"""

import click
import numpy as np
import structlog

from atomsync.commands.base import RunContext, experiment_options, run_command
from atomsync.commands.cycles_commands import grid_axes
from atomsync.services.chaos_service import box_counting_dimension, embed, lyapunov_map, max_lyapunov
from atomsync.services.integrator_service import SystemKind, integrate
from atomsync.services.output_service import write_csv

logger = structlog.get_logger(__name__)


def _attractor_samples(run: RunContext) -> np.ndarray:
    """Embedded attractor states sampled every box_interval after the transient."""
    exp = run.exp
    section = exp.command
    t0 = exp.lyapunov.transient
    cfg = exp.integrator.model_copy(update={
        "max_tau": t0 + section.box_samples * section.box_interval,
        "sample_interval": section.box_interval,
    })
    traj = integrate(SystemKind.REDUCED, exp.initial.state(), exp.params, cfg, noise=exp.noise)
    return embed(traj.states[traj.times >= t0])


def _lyapunov(run: RunContext) -> str:
    exp = run.exp
    estimate = max_lyapunov(exp.params, exp.initial.state(), exp.integrator, exp.lyapunov, exp.noise)
    results = run.manifest.results
    results["lambda"] = estimate.lambda_
    results["stderr"] = estimate.stderr
    results["horizon"] = estimate.horizon
    results["renorm_interval"] = estimate.renorm_interval
    summary = f"lambda = {estimate.lambda_:.4g} +/- {estimate.stderr:.2g}"

    if exp.command.box_counting:
        points = _attractor_samples(run)
        dim = box_counting_dimension(points, workers=run.workers)
        write_csv(run.path("box_counts.csv"), ["eps", "count"], zip(dim.scales.tolist(), dim.counts.tolist()))
        results["dimension"] = {
            "d_F": dim.dimension,
            "r_squared": dim.r_squared,
            "eps_min": dim.eps_min,
            "eps_max": dim.eps_max,
            "points": len(points),
        }
        summary += f", d_F = {dim.dimension:.3g}"
    return summary


def _lyapunov_map(run: RunContext) -> str:
    exp = run.exp
    n_values, delta_values = grid_axes(exp.command)
    lmap = lyapunov_map(
        exp.params, n_values, delta_values, exp.initial.state(), exp.integrator, exp.lyapunov,
        workers=run.workers,
    )
    write_csv(run.path("lyapunov_map.csv"), ["n", "delta", "lambda", "stderr"], lmap.rows())
    finite = lmap.lambdas[np.isfinite(lmap.lambdas)]
    run.manifest.results["lambda_max"] = float(finite.max()) if finite.size else None
    run.manifest.results["positive_cells"] = int(np.sum(finite > exp.classifier.lambda_min))
    run.manifest.record_failures(lmap.failed, [(float(n), float(d)) for n in n_values for d in delta_values])
    return f"lyapunov map: {len(n_values)}x{len(delta_values)} cells"


@click.command("lyapunov")
@experiment_options
@click.pass_context
def lyapunov(ctx, config_path, overrides, workers, seed, out_dir):
    """Maximal Lyapunov exponent and optional box-counting dimension."""
    run_command(ctx, "lyapunov", _lyapunov, config_path, overrides, workers, seed, out_dir)


@click.command("lyapunov-map")
@experiment_options
@click.pass_context
def lyapunov_map_command(ctx, config_path, overrides, workers, seed, out_dir):
    """Maximal Lyapunov exponent on the (n, delta) plane."""
    run_command(ctx, "lyapunov-map", _lyapunov_map, config_path, overrides, workers, seed, out_dir)


commands = [lyapunov, lyapunov_map_command]
