"""Run configuration commands."""

from pathlib import Path
from typing import Annotated

import typer

from mdi_keyrate.cli import (
    ConfigOption,
    SetOption,
    config_app,
    console,
    fail,
    get_settings,
    resolve_config,
    start_command,
)
from mdi_keyrate.errors import KeyRateError
from mdi_keyrate.scan.runconfig import RunConfig, dump_run_config

RUN_CONFIG_HEADER = """# mdi-keyrate run configuration
# One 'key = value' per line; '#' starts a comment.
# Aliases: mu (sets mu_z and mu_x), nu (nu_x), distance_per_arm, total_distance.
# variant: rfi | original        scheme: symmetric | biased
# mode: asymptotic | finite      prefactors: unit | sampling
# ie_bound: printed | root       decoy_t1: symmetric | printed
"""


@config_app.command("show")
def config_show(
    config_path: ConfigOption = None,
    overrides: SetOption = None,
) -> None:
    """Print the fully resolved run configuration, defaults included."""
    settings = get_settings()
    logger = start_command("config", settings)
    try:
        config = resolve_config(settings, config_path, overrides)
    except KeyRateError as e:
        fail(e, logger)
    typer.echo(dump_run_config(config), nl=False)


@config_app.command("init")
def config_init(
    path: Annotated[
        Path | None,
        typer.Option("--path", "-p", help="Target file (default: settings run config path)"),
    ] = None,
    force: Annotated[
        bool, typer.Option("--force", "-f", help="Overwrite an existing file")
    ] = False,
) -> None:
    """Write a commented run configuration with every default."""
    settings = get_settings()
    target = path or settings.run_config_path
    if target.exists() and not force:
        console.print(f"[yellow]Already exists:[/yellow] {target} (use --force to overwrite)")
        raise typer.Exit(1)

    if path is None:
        settings.ensure_config_dir()
    target.parent.mkdir(parents=True, exist_ok=True)
    config = RunConfig(seed=settings.default_seed)
    target.write_text(RUN_CONFIG_HEADER + "\n" + dump_run_config(config))
    console.print(f"[green]Created[/green] {target}")
