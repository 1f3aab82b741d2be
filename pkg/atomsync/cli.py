"""
Standing Wave Sync - Command Line Application

Entry point for the `atomsync` command. Sets up settings and logging,
then registers every command group.
"""

import click
import structlog
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

from atomsync.commands import (  # noqa: E402
    basins_commands,
    chaos_commands,
    cycles_commands,
    dynamics_commands,
    scattering_commands,
    spectra_commands,
)
from atomsync.config import Settings, get_config  # noqa: E402
from atomsync.logging_config import configure_logging  # noqa: E402

COMMAND_GROUPS = (
    dynamics_commands,
    cycles_commands,
    chaos_commands,
    basins_commands,
    spectra_commands,
    scattering_commands,
)


def create_cli(settings: Settings = None) -> click.Group:
    """Application factory pattern."""

    @click.group(name="atomsync", context_settings={"help_option_names": ["-h", "--help"]})
    @click.version_option(version=(settings or get_config()).code_version, prog_name="atomsync")
    @click.pass_context
    def cli(ctx):
        """Atom synchronization in a standing light wave: simulations and sweeps."""
        active = settings or get_config()
        configure_logging(active.log_level, active.log_format)
        ctx.ensure_object(dict)
        ctx.obj["settings"] = active
        structlog.get_logger(__name__).debug("CLI started", command=ctx.invoked_subcommand)

    # Register command groups
    for group in COMMAND_GROUPS:
        for command in group.commands:
            cli.add_command(command)

    return cli


def main() -> None:
    create_cli()(obj={})


if __name__ == "__main__":
    main()
