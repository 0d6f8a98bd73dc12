"""Single-point evaluation, optimization and key rates from measured counts."""

import json
from pathlib import Path
from typing import Annotated

import typer
from rich.markup import escape
from rich.table import Table

from mdi_keyrate.cli import (
    ConfigOption,
    JsonOption,
    SetOption,
    app,
    console,
    fail,
    get_settings,
    resolve_config,
    start_command,
)
from mdi_keyrate.errors import ConfigurationError, KeyRateError
from mdi_keyrate.protocol import EvaluationMode
from mdi_keyrate.security import KeyRateReport


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.6g}"


def render_report(report: KeyRateReport, title: str = "Key rate") -> Table:
    """Summary table of a report; the JSON output carries every field."""
    table = Table(title=title, show_header=True)
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right")

    table.add_row("variant", report.variant.value)
    table.add_row("mode", report.mode.value)
    table.add_row("status", report.status.value)
    table.add_row("rate (bits/pulse pair)", f"[bold]{report.rate:.6e}[/bold]")
    table.add_row("Q_ZZ", _fmt(report.q_zz))
    table.add_row("E_ZZ", _fmt(report.e_zz))
    table.add_row("S_ZZ^11 lower", _fmt(report.s_zz_11_lower))
    table.add_row("e_ZZ^11 upper", _fmt(report.e_zz_11_upper))
    table.add_row("C", _fmt(report.c_value))
    table.add_row("I_E", _fmt(report.i_e))
    if report.flipped:
        table.add_row("flipped", ", ".join(report.flipped))
    if report.failed_bases:
        table.add_row("failed", ", ".join(report.failed_bases))
    if report.mode is EvaluationMode.FINITE:
        table.add_row("N", _fmt(report.n_pairs))
        table.add_row("epsilon", _fmt(report.epsilon))
        table.add_row("total failure", _fmt(report.total_failure_probability))
    return table


def _emit(report: KeyRateReport, as_json: bool, output: Path | None, title: str) -> None:
    text = report.model_dump_json(indent=2)
    if output is not None:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text + "\n")
    if as_json:
        typer.echo(text)
        return
    console.print(render_report(report, title))
    for line in report.diagnostics:
        console.print(f"[yellow]{escape(line)}[/yellow]")
    if output is not None:
        console.print(f"[green]Wrote[/green] {output}")


@app.command()
def simulate(
    config_path: ConfigOption = None,
    overrides: SetOption = None,
    as_json: JsonOption = False,
    output: Annotated[
        Path | None, typer.Option("--output", "-o", help="Write the JSON report here")
    ] = None,
) -> None:
    """Evaluate the key rate at a single configuration point."""
    from mdi_keyrate.keyrate import evaluate

    settings = get_settings()
    logger = start_command("simulate", settings)
    try:
        config = resolve_config(settings, config_path, overrides)
        logger.info(
            "simulate %s %s at %.3g km",
            config.protocol.variant.value,
            config.mode.value,
            config.channel.total_distance,
        )
        report = evaluate(config)
    except KeyRateError as e:
        fail(e, logger)

    logger.info("rate=%.4e status=%s", report.rate, report.status.value)
    _emit(report, as_json, output, "Simulated key rate")


def parse_bound(item: str) -> tuple[str, tuple[float, float]]:
    """Parse ``name=low:high`` (a range) or ``name=value`` (a pinned parameter)."""
    name, sep, spec = item.partition("=")
    if not sep:
        raise ConfigurationError(f"Bound must look like name=low:high or name=value: {item!r}")
    low_text, colon, high_text = spec.partition(":")
    try:
        low = float(low_text)
        high = float(high_text) if colon else low
    except ValueError:
        raise ConfigurationError(f"Cannot parse bound {item!r}", key=name.strip()) from None
    return name.strip(), (low, high)


@app.command()
def optimize(
    config_path: ConfigOption = None,
    overrides: SetOption = None,
    bounds: Annotated[
        list[str] | None,
        typer.Option(
            "--bound", "-b", help="Search range name=low:high, or name=value to pin (repeatable)"
        ),
    ] = None,
    starts: Annotated[int, typer.Option("--starts", help="Quasi-random starts", min=0)] = 8,
    as_json: JsonOption = False,
) -> None:
    """Maximize the key rate over intensities and basis probabilities."""
    from mdi_keyrate.optimizer import optimize_parameters

    settings = get_settings()
    logger = start_command("optimize", settings)
    try:
        config = resolve_config(settings, config_path, overrides)
        limits = dict(parse_bound(item) for item in bounds or [])
        finite = config.finite if config.mode is EvaluationMode.FINITE else None
        logger.info("optimize %s %s", config.protocol.variant.value, config.mode.value)
        result = optimize_parameters(
            config.protocol,
            config.channel,
            finite,
            bounds=limits,
            seed=config.seed,
            n_starts=starts,
            max_workers=settings.max_workers,
        )
    except KeyRateError as e:
        fail(e, logger)

    logger.info(
        "best rate=%.4e converged=%s evaluations=%d",
        result.best_rate,
        result.converged,
        result.evaluations,
    )
    if as_json:
        payload = {
            "optimum": result.best.as_dict(),
            "best_rate": result.best_rate,
            "converged": result.converged,
            "evaluations": result.evaluations,
            "start_rates": result.start_rates,
            "report": result.report.model_dump(mode="json"),
        }
        typer.echo(json.dumps(payload, indent=2))
        return

    table = Table(title="Optimal parameters", show_header=True)
    table.add_column("Parameter", style="cyan")
    table.add_column("Value", justify="right")
    for name, value in result.best.as_dict().items():
        table.add_row(name, f"{value:.4f}")
    console.print(table)
    console.print(render_report(result.report, "Key rate at optimum"))
    status = "[green]converged[/green]" if result.converged else "[yellow]not converged[/yellow]"
    console.print(f"{status} after {result.evaluations} evaluations")
    if result.zero_rate:
        console.print("[yellow]No positive key rate found within the bounds[/yellow]")


@app.command()
def keyrate(
    counts_path: Annotated[Path, typer.Argument(help="Counts file, nine columns per cell")],
    config_path: ConfigOption = None,
    overrides: SetOption = None,
    point_estimates: Annotated[
        bool,
        typer.Option("--point-estimates", help="Use k/n directly, without fluctuation intervals"),
    ] = False,
    as_json: JsonOption = False,
    output: Annotated[
        Path | None, typer.Option("--output", "-o", help="Write the JSON report here")
    ] = None,
) -> None:
    """Compute the finite-size key rate from measured counts."""
    from mdi_keyrate.scan.counts import compute_from_counts

    settings = get_settings()
    logger = start_command("keyrate", settings)
    try:
        config = resolve_config(settings, config_path, overrides)
        logger.info("keyrate from %s", counts_path)
        report = compute_from_counts(counts_path, config, point_estimates=point_estimates)
    except KeyRateError as e:
        fail(e, logger)

    logger.info("rate=%.4e status=%s", report.rate, report.status.value)
    _emit(report, as_json, output, "Key rate from counts")
