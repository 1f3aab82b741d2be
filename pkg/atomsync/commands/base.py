"""
Standing Wave Sync - Command Plumbing

Options shared by every subcommand and the runner that loads the
experiment, prepares the run directory, maps library errors to exit codes
and always writes the manifest.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import click
import structlog

from atomsync.config import Settings
from atomsync.errors import AtomSyncError, ConfigError, IntegrationError
from atomsync.experiment import ExperimentConfig, load_experiment
from atomsync.services.output_service import RunManifest, ensure_dir

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INTEGRATION = 3
EXIT_LIBRARY = 4


@dataclass
class RunContext:
    """Everything a command body needs."""

    exp: ExperimentConfig
    out_dir: Path
    manifest: RunManifest
    workers: int
    settings: Settings

    def path(self, name: str) -> Path:
        target = self.out_dir / name
        self.manifest.add_file(target)
        return target


def experiment_options(func: Callable) -> Callable:
    """Attach --config/--set/--workers/--seed/--out to a subcommand."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="Experiment file (INI sections)."),
        click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE",
                     help="Override one configuration key; repeatable."),
        click.option("--workers", type=click.IntRange(min=1), help="Worker processes for sweeps."),
        click.option("--seed", type=int, help="Run seed (noise phases)."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _cli_overrides(overrides: Sequence[str], workers: Optional[int], seed: Optional[int],
                   out_dir: Optional[str]) -> List[str]:
    merged = list(overrides)
    if workers is not None:
        merged.append(f"run.workers={workers}")
    if seed is not None:
        merged.append(f"run.seed={seed}")
    if out_dir is not None:
        merged.append(f"run.out={out_dir}")
    return merged


def run_command(
    ctx: click.Context,
    command: str,
    body: Callable[[RunContext], str],
    config_path: Optional[str],
    overrides: Sequence[str],
    workers: Optional[int],
    seed: Optional[int],
    out_dir: Optional[str],
) -> None:
    """
    Execute a command body inside the standard run envelope.

    The body writes its files through RunContext.path, fills
    manifest.results and returns a one-line summary for the terminal.
    """
    settings: Settings = ctx.obj["settings"]
    try:
        exp = load_experiment(config_path, _cli_overrides(overrides, workers, seed, out_dir), command=command)
    except ConfigError as e:
        raise click.UsageError(str(e), ctx=ctx)

    target = ensure_dir(exp.run.out or Path(settings.output_dir) / command)
    manifest = RunManifest(command, exp.to_sections(), exp.run.seed, settings.code_version)
    run = RunContext(
        exp=exp,
        out_dir=target,
        manifest=manifest,
        workers=exp.run.workers or settings.workers,
        settings=settings,
    )
    logger.info("Command started", command=command, out=str(target), workers=run.workers)

    code = EXIT_OK
    try:
        summary = body(run)
    except IntegrationError as e:
        logger.error("Integration failed", command=command, error=str(e), last_time=e.last_time)
        manifest.results["error"] = {"category": e.category, "message": str(e), "last_time": e.last_time}
        summary, code = f"integration error: {e}", EXIT_INTEGRATION
    except (ConfigError, ValueError) as e:
        category = getattr(e, "category", ConfigError.category)
        logger.error("Command rejected its parameters", command=command, category=category, error=str(e))
        manifest.results["error"] = {"category": category, "message": str(e)}
        summary, code = f"{category}: {e}", EXIT_USAGE
    except AtomSyncError as e:
        logger.error("Command failed", command=command, category=e.category, error=str(e))
        manifest.results["error"] = {"category": e.category, "message": str(e)}
        summary, code = f"{e.category}: {e}", EXIT_LIBRARY
    finally:
        manifest.write(target)

    click.echo(summary)
    if manifest.warnings:
        click.echo(f"{len(manifest.warnings)} warning(s); see {target / 'manifest.json'}", err=True)
    if code != EXIT_OK:
        ctx.exit(code)
