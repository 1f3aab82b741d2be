"""
Standing Wave Sync - Dynamics Commands

`simulate` (single trajectories, events and random-walk episodes) and
`friction` (empirical friction curve and velocity grouping).
"""

import click
import numpy as np
import structlog

from atomsync.commands.base import RunContext, experiment_options, run_command
from atomsync.models import FullState
from atomsync.services.dynamics_service import conserved_quantities, friction_force_analytic
from atomsync.services.integrator_service import EventSpec, SystemKind, integrate
from atomsync.services.observables_service import (
    detect_grouping,
    empirical_friction_curve,
    walk_episodes,
)
from atomsync.services.output_service import write_csv

logger = structlog.get_logger(__name__)


def _simulate(run: RunContext) -> str:
    exp = run.exp
    section = exp.command
    prm = exp.params
    initial = exp.initial.state()

    events = []
    if section.node_events:
        events.append(EventSpec.node_crossing())
    if section.section_events:
        events.append(EventSpec.section_u0())

    if section.system == "full":
        system = SystemKind.FULL
        if prm.E != 0.0 and prm.gamma_f > 0.0:
            s0 = FullState.from_reduced(initial, prm)
        else:
            run.manifest.warn("No pumped steady field (E = 0 or gamma_f = 0); starting from an empty cavity")
            s0 = FullState(xi=initial.xi, p=initial.p, z=initial.z)
        run.manifest.results["reduced_validity"] = prm.reduced_validity()
    else:
        system = SystemKind.REDUCED
        s0 = initial

    traj = integrate(system, s0, prm, exp.integrator, events=events, noise=exp.noise)
    traj.to_csv(run.path("trajectory.csv"))
    if events:
        traj.events_to_csv(run.path("events.csv"))

    results = run.manifest.results
    results["samples"] = len(traj)
    results["final_time"] = traj.final_time
    results["final_state"] = dict(zip(traj.columns, traj.final_state.tolist()))
    results["events"] = {spec.name: len(traj.events_of(spec.name)) for spec in events}

    if system is SystemKind.REDUCED:
        start = conserved_quantities(traj.state_at(0), prm)
        end = conserved_quantities(traj.state_at(-1), prm)
        results["conserved_start"] = list(start)
        results["conserved_end"] = list(end)
        if section.episodes:
            episodes = walk_episodes(traj)
            write_csv(
                run.path("episodes.csv"),
                ["kind", "t_start", "t_end", "xi_start", "xi_end"],
                [(e.kind.value, e.t_start, e.t_end, e.xi_start, e.xi_end) for e in episodes],
            )
            results["episodes"] = {
                kind: sum(1 for e in episodes if e.kind.value == kind) for kind in ("trapped", "flight")
            }

    return f"simulated {len(traj)} samples to tau={traj.final_time:.6g}"


def _friction(run: RunContext) -> str:
    exp = run.exp
    section = exp.command
    prm = exp.params
    grid = np.linspace(section.p_min, section.p_max, section.p_steps)

    curve = empirical_friction_curve(
        prm, grid, flights=section.flights, settle_flights=section.settle_flights,
        cfg=exp.integrator, workers=run.workers,
    )
    write_csv(run.path("friction.csv"), ["p_bar", "F"], curve.samples.tolist())
    write_csv(run.path("friction_zeros.csv"), ["p_zero", "kind"],
              [(z.p_zero, z.kind.value) for z in curve.zeros])
    write_csv(run.path("friction_analytic.csv"), ["p", "F"],
              [(p, friction_force_analytic(p, prm)) for p in grid])

    results = run.manifest.results
    results["sign_convention"] = "F = -d|p_bar|/dtau (F > 0 decelerates)"
    results["p_cr"] = curve.p_cr
    results["p_a"] = curve.p_a
    results["p_b"] = curve.p_b
    results["trapped_points"] = curve.trapped_points
    if curve.trapped_points:
        run.manifest.warn(f"{len(curve.trapped_points)} grid point(s) trapped")

    if section.grouping_p0:
        grouping = detect_grouping(
            prm, section.grouping_p0, section.grouping_horizon, spread_tol=section.spread_tol,
            cfg=exp.integrator, workers=run.workers,
        )
        results["grouping"] = {
            "grouped": grouping.grouped,
            "p_s": grouping.p_s,
            "spread": grouping.spread,
            "final_momenta": grouping.final_momenta,
        }
        if grouping.grouped:
            bracket = curve.attractor_bracket(grouping.p_s)
            results["grouping"]["attractor_bracket"] = list(bracket) if bracket else None
            if bracket is None:
                run.manifest.warn(f"Grouping momentum {grouping.p_s:.4g} lies in no attractor basin of the curve")

    return f"friction curve: {len(curve.samples)} points, {len(curve.zeros)} zero(s), p_cr={curve.p_cr:.4g}"


@click.command("simulate")
@experiment_options
@click.pass_context
def simulate(ctx, config_path, overrides, workers, seed, out_dir):
    """Integrate one trajectory and write it with its events."""
    run_command(ctx, "simulate", _simulate, config_path, overrides, workers, seed, out_dir)


@click.command("friction")
@experiment_options
@click.pass_context
def friction(ctx, config_path, overrides, workers, seed, out_dir):
    """Empirical friction curve F(|p_bar|) and optional velocity grouping."""
    run_command(ctx, "friction", _friction, config_path, overrides, workers, seed, out_dir)


commands = [simulate, friction]
