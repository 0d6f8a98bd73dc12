"""Command-line interface for mdi-keyrate."""

import logging
from pathlib import Path
from typing import Annotated, NoReturn

import typer
from rich.console import Console
from rich.markup import escape

from mdi_keyrate.config import Settings
from mdi_keyrate.errors import KeyRateError
from mdi_keyrate.scan.runconfig import RunConfig, apply_overrides, load_run_config

app = typer.Typer(
    name="mdi-keyrate",
    help="Secret key rates of reference-frame-independent and original MDI-QKD",
    no_args_is_help=True,
)
console = Console()

# Sub-command groups
config_app = typer.Typer(help="Show or scaffold the run configuration")

app.add_typer(config_app, name="config")

# Options shared by every evaluating command
ConfigOption = Annotated[
    Path | None,
    typer.Option("--config", "-c", help="Run configuration (key=value or YAML)"),
]
SetOption = Annotated[
    list[str] | None,
    typer.Option("--set", "-s", help="Override one setting as key=value (repeatable)"),
]
JsonOption = Annotated[bool, typer.Option("--json", help="Print the full report as JSON")]


def get_settings() -> Settings:
    """Load application settings."""
    return Settings()


def start_command(command: str, settings: Settings) -> logging.Logger:
    """Configure logging for one command and return its run logger."""
    from mdi_keyrate.logging import get_run_logger, setup_logging

    setup_logging(
        log_dir=settings.log_dir,
        log_level=settings.log_level,
        max_bytes=settings.log_rotation_size_mb * 1024 * 1024,
        backup_count=settings.log_backup_count,
    )
    return get_run_logger(command)


def resolve_config(
    settings: Settings, config_path: Path | None, overrides: list[str] | None
) -> RunConfig:
    """Defaults, then the config file (explicit or the default location), then ``--set``.

    Raises:
        ConfigurationError: If the file or an override is invalid.
    """
    config = RunConfig(seed=settings.default_seed)
    path = config_path or (settings.run_config_path if settings.run_config_path.exists() else None)
    if path is not None:
        config = load_run_config(path, base=config)
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def fail(error: KeyRateError, logger: logging.Logger) -> NoReturn:
    """Report a named error on the console and in the logs, then exit with status 1."""
    logger.error("%s: %s", type(error).__name__, error)
    console.print(f"[red]{type(error).__name__}:[/red] {escape(str(error))}")
    raise typer.Exit(1)


@app.command()
def version() -> None:
    """Show version information."""
    from mdi_keyrate import __version__

    console.print(f"mdi-keyrate v{__version__}")


# Import sub-modules to trigger command registration
from mdi_keyrate.cli import configure  # noqa: E402, F401
from mdi_keyrate.cli import evaluate  # noqa: E402, F401
from mdi_keyrate.cli import scan  # noqa: E402, F401

if __name__ == "__main__":
    app()
