"""Parameter sweeps over distance or misalignment, written as CSV."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from pydantic import BaseModel, Field, ValidationError, model_validator

from mdi_keyrate import __version__
from mdi_keyrate.errors import KeyRateError
from mdi_keyrate.keyrate import evaluate_asymptotic, evaluate_finite
from mdi_keyrate.model.channel import ChannelParams
from mdi_keyrate.optimizer import PARAMETER_NAMES, optimize_parameters
from mdi_keyrate.protocol import EvaluationMode, ProtocolConfig, ProtocolVariant
from mdi_keyrate.scan.runconfig import RunConfig, dump_run_config

logger = logging.getLogger(__name__)

RATE_UNIT = "secret bits per transmitted pulse pair"

CSV_COLUMNS = (
    "axis",
    "value",
    "variant",
    "mode",
    "status",
    "rate",
    "c_value",
    "i_e",
    "q_zz",
    "e_zz",
    "s_zz_11_lower",
    "e_zz_11_upper",
    *(f"opt_{name}" for name in PARAMETER_NAMES),
    "message",
)

GRID_TOL = 1e-9


class ScanAxis(str, Enum):
    """Quantity varied along a scan."""

    DISTANCE_PER_ARM = "distance_per_arm"
    TOTAL_DISTANCE = "total_distance"
    BETA = "beta"


class ScanSpec(BaseModel):
    """Grid, variants and evaluation settings of one sweep."""

    axis: ScanAxis = Field(default=ScanAxis.DISTANCE_PER_ARM, description="Swept quantity")
    start: float = Field(default=0.0, description="First grid value")
    stop: float = Field(default=100.0, description="Last grid value (inclusive)")
    step: float = Field(default=10.0, gt=0.0, description="Grid spacing")
    variants: list[ProtocolVariant] = Field(
        default_factory=lambda: [ProtocolVariant.RFI], min_length=1
    )
    mode: EvaluationMode | None = Field(default=None, description="Overrides the run config mode")
    optimize: bool = Field(default=False, description="Optimize parameters at every point")

    @model_validator(mode="after")
    def validate_range(self) -> ScanSpec:
        if self.stop < self.start:
            raise ValueError(f"empty scan range: stop ({self.stop:g}) < start ({self.start:g})")
        return self

    def values(self) -> list[float]:
        """Grid values from start to stop inclusive."""
        count = math.floor((self.stop - self.start) / self.step + GRID_TOL) + 1
        return [round(self.start + i * self.step, 12) for i in range(count)]


@dataclass
class ScanRow:
    """One grid point of one protocol variant."""

    axis: ScanAxis
    value: float
    variant: ProtocolVariant
    mode: EvaluationMode
    status: str
    rate: float | None = None
    c_value: float | None = None
    i_e: float | None = None
    q_zz: float | None = None
    e_zz: float | None = None
    s_zz_11_lower: float | None = None
    e_zz_11_upper: float | None = None
    optimum: dict[str, float] = field(default_factory=dict)
    message: str = ""

    def as_csv_row(self) -> list[str]:
        cells: list[str] = [
            self.axis.value,
            _fmt(self.value),
            self.variant.value,
            self.mode.value,
            self.status,
        ]
        cells.extend(
            _fmt(getattr(self, name))
            for name in ("rate", "c_value", "i_e", "q_zz", "e_zz", "s_zz_11_lower", "e_zz_11_upper")
        )
        cells.extend(_fmt(self.optimum.get(name)) for name in PARAMETER_NAMES)
        cells.append(self.message)
        return cells


def _fmt(value: float | None) -> str:
    """Missing values are empty cells, never zeros."""
    if value is None:
        return ""
    return f"{value:.10g}"


def point_config(
    config: RunConfig, axis: ScanAxis, value: float, variant: ProtocolVariant
) -> RunConfig:
    """Run configuration of one grid point.

    Raises:
        pydantic.ValidationError: If the point is outside a parameter's range.
    """
    channel = config.channel.model_dump()
    protocol = config.protocol.model_dump()
    protocol["variant"] = variant
    if axis is ScanAxis.DISTANCE_PER_ARM:
        channel.update(dist_a=value, dist_b=value)
    elif axis is ScanAxis.TOTAL_DISTANCE:
        channel.update(dist_a=value / 2.0, dist_b=value / 2.0)
    else:
        protocol["beta_deg"] = value
    return config.model_copy(
        update={
            "channel": ChannelParams.model_validate(channel),
            "protocol": ProtocolConfig.model_validate(protocol),
        }
    )


class _PointEvaluator:
    """Evaluates one grid point; failures become status rows."""

    def __init__(self, spec: ScanSpec, config: RunConfig) -> None:
        self.spec = spec
        self.config = config
        self.mode = spec.mode or config.mode

    def __call__(self, point: tuple[float, ProtocolVariant]) -> ScanRow:
        value, variant = point
        row = ScanRow(self.spec.axis, value, variant, self.mode, status="ok")
        try:
            config = point_config(self.config, self.spec.axis, value, variant)
            finite = config.finite if self.mode is EvaluationMode.FINITE else None
            if self.spec.optimize:
                result = optimize_parameters(
                    config.protocol, config.channel, finite, seed=config.seed, max_workers=1
                )
                report = result.report
                row.optimum = result.best.as_dict()
            elif finite is not None:
                report = evaluate_finite(config.protocol, config.channel, finite)
            else:
                report = evaluate_asymptotic(config.protocol, config.channel)
        except (KeyRateError, ValidationError) as e:
            logger.warning(
                "Scan point %s=%g (%s) failed: %s", self.spec.axis.value, value, variant.value, e
            )
            row.status = "error"
            row.message = " ".join(str(e).split())
            return row

        row.status = report.status.value
        row.rate = report.rate
        row.c_value = report.c_value
        row.i_e = report.i_e
        row.q_zz = report.q_zz
        row.e_zz = report.e_zz
        row.s_zz_11_lower = report.s_zz_11_lower
        row.e_zz_11_upper = report.e_zz_11_upper
        if report.diagnostics:
            row.message = "; ".join(report.diagnostics)
        return row


def run_scan(spec: ScanSpec, config: RunConfig, *, max_workers: int = 4) -> list[ScanRow]:
    """Evaluate every grid point for every variant, in grid order.

    A failing point yields a row with status ``error`` and the message; the
    sweep continues.
    """
    grid = spec.values()
    points = [(value, variant) for value in grid for variant in spec.variants]
    logger.info(
        "Scanning %s over %d points x %d variants", spec.axis.value, len(grid), len(spec.variants)
    )
    evaluator = _PointEvaluator(spec, config)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        rows = list(pool.map(evaluator, points))
    failed = sum(1 for row in rows if row.status == "error")
    logger.info("Scan finished: %d rows, %d failed", len(rows), failed)
    return rows


def render_csv(rows: list[ScanRow], config: RunConfig, spec: ScanSpec) -> str:
    """CSV text with ``#`` metadata lines, the header row and one line per row."""
    variants = ",".join(v.value for v in spec.variants)
    mode = (spec.mode or config.mode).value
    header = [
        f"# mdi-keyrate {__version__}",
        f"# rate unit: {RATE_UNIT}",
        f"# scan: axis={spec.axis.value} start={spec.start:g} stop={spec.stop:g} "
        f"step={spec.step:g} variants={variants} mode={mode} "
        f"optimize={str(spec.optimize).lower()}",
    ]
    buffer = io.StringIO()
    buffer.write("\n".join(header) + "\n")
    buffer.write(dump_run_config(config, comment_prefix="# "))
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(row.as_csv_row() for row in rows)
    return buffer.getvalue()


def write_csv(rows: list[ScanRow], path: Path, config: RunConfig, spec: ScanSpec) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(rows, config, spec))
