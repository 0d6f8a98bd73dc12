"""Sweep command."""

from pathlib import Path
from typing import Annotated

import typer
from pydantic import ValidationError
from rich.table import Table

from mdi_keyrate.cli import (
    ConfigOption,
    SetOption,
    app,
    console,
    fail,
    get_settings,
    resolve_config,
    start_command,
)
from mdi_keyrate.errors import ConfigurationError, KeyRateError
from mdi_keyrate.protocol import EvaluationMode, ProtocolVariant
from mdi_keyrate.scan.sweep import ScanAxis, ScanRow, ScanSpec, render_csv, run_scan


def _summary(rows: list[ScanRow]) -> Table:
    table = Table(title="Scan", show_header=True)
    table.add_column("Value", justify="right")
    table.add_column("Variant", style="cyan")
    table.add_column("Status")
    table.add_column("Rate", justify="right")
    table.add_column("C", justify="right")
    table.add_column("I_E", justify="right")
    for row in rows:
        status = row.status if row.status == "ok" else f"[yellow]{row.status}[/yellow]"
        table.add_row(
            f"{row.value:g}",
            row.variant.value,
            status,
            "" if row.rate is None else f"{row.rate:.4e}",
            "" if row.c_value is None else f"{row.c_value:.4f}",
            "" if row.i_e is None else f"{row.i_e:.4f}",
        )
    return table


@app.command()
def scan(
    axis: Annotated[ScanAxis, typer.Option("--axis", "-a", help="Swept quantity")] = (
        ScanAxis.DISTANCE_PER_ARM
    ),
    start: Annotated[float, typer.Option("--start", help="First grid value")] = 0.0,
    stop: Annotated[float, typer.Option("--stop", help="Last grid value")] = 100.0,
    step: Annotated[float, typer.Option("--step", help="Grid spacing")] = 10.0,
    variants: Annotated[
        list[ProtocolVariant] | None,
        typer.Option("--variant", "-V", help="Protocol variant (repeatable, default rfi)"),
    ] = None,
    mode: Annotated[
        EvaluationMode | None,
        typer.Option("--mode", "-m", help="Override the configured evaluation mode"),
    ] = None,
    optimize: Annotated[
        bool, typer.Option("--optimize", help="Optimize parameters at every point")
    ] = False,
    output: Annotated[
        Path | None,
        typer.Option("--output", "-o", help="CSV path (default: config 'output', else stdout)"),
    ] = None,
    config_path: ConfigOption = None,
    overrides: SetOption = None,
) -> None:
    """Sweep distance or misalignment and write one CSV row per point and variant."""
    settings = get_settings()
    logger = start_command("scan", settings)
    try:
        config = resolve_config(settings, config_path, overrides)
        try:
            spec = ScanSpec(
                axis=axis,
                start=start,
                stop=stop,
                step=step,
                variants=variants or [ProtocolVariant.RFI],
                mode=mode,
                optimize=optimize,
            )
        except ValidationError as e:
            raise ConfigurationError(f"Invalid scan: {e.errors()[0]['msg']}") from e
        logger.info("scan %s from %g to %g step %g", axis.value, start, stop, step)
        rows = run_scan(spec, config, max_workers=settings.max_workers)
    except KeyRateError as e:
        fail(e, logger)

    text = render_csv(rows, config, spec)
    destination = output or config.output
    if destination is None:
        typer.echo(text, nl=False)
        return

    try:
        destination.parent.mkdir(parents=True, exist_ok=True)
        destination.write_text(text)
    except OSError as e:
        logger.error("Cannot write %s: %s", destination, e)
        console.print(f"[red]Cannot write {destination}:[/red] {e}")
        raise typer.Exit(1) from e

    console.print(_summary(rows))
    failed = sum(1 for row in rows if row.status == "error")
    if failed:
        console.print(f"[yellow]{failed} point(s) failed; see the status column[/yellow]")
    console.print(f"[green]Wrote[/green] {destination}")
