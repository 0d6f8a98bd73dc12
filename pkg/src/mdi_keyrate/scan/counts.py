"""Counts files: one measured cell per line, and the key rate computed from them.

Format (whitespace separated, ``#`` starts a comment)::

    basisA basisB intA intB pairs_sent psi_plus psi_minus err_psi_plus err_psi_minus
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

from mdi_keyrate.errors import CountsSchemaError, DomainError, EstimationError
from mdi_keyrate.finitekey import (
    CountRecord,
    CountsTable,
    asymptotic_rate_from_counts,
    finite_key_rate,
)
from mdi_keyrate.keyrate import zero_rate_report
from mdi_keyrate.model.observables import BasisPair, CellKey
from mdi_keyrate.protocol import EvaluationMode, IntensityLabel
from mdi_keyrate.scan.runconfig import RunConfig
from mdi_keyrate.security import KeyRateReport

logger = logging.getLogger(__name__)

COLUMNS = (
    "basisA",
    "basisB",
    "intA",
    "intB",
    "pairs_sent",
    "psi_plus",
    "psi_minus",
    "err_psi_plus",
    "err_psi_minus",
)


def _parse_count(token: str, column: str, path: Path, line_no: int) -> int:
    """Parse a non-negative integer; integral scientific notation (3e12) is accepted."""
    try:
        return int(token)
    except ValueError:
        pass
    try:
        value = float(token)
    except ValueError:
        raise CountsSchemaError(f"{column} is not a number: {token!r}", path, line_no) from None
    if not math.isfinite(value) or not value.is_integer():
        raise CountsSchemaError(f"{column} must be an integer, got {token!r}", path, line_no)
    return int(value)


def _parse_line(tokens: list[str], path: Path, line_no: int) -> tuple[CellKey, CountRecord]:
    if len(tokens) != len(COLUMNS):
        raise CountsSchemaError(
            f"expected {len(COLUMNS)} columns ({' '.join(COLUMNS)}), got {len(tokens)}",
            path,
            line_no,
        )
    basis_a, basis_b, int_a, int_b, *numbers = tokens
    try:
        basis = BasisPair.from_letters(basis_a, basis_b)
    except ValueError:
        raise CountsSchemaError(
            f"unknown basis pair {basis_a}{basis_b}; expected one of "
            f"{', '.join(b.value for b in BasisPair)}",
            path,
            line_no,
        ) from None
    labels = []
    for token in (int_a, int_b):
        try:
            labels.append(IntensityLabel(token))
        except ValueError:
            raise CountsSchemaError(
                f"unknown intensity label {token!r}; expected one of "
                f"{', '.join(label.value for label in IntensityLabel)}",
                path,
                line_no,
            ) from None

    values = [
        _parse_count(token, column, path, line_no)
        for token, column in zip(numbers, COLUMNS[4:], strict=True)
    ]
    try:
        record = CountRecord(*values)
    except DomainError as e:
        raise CountsSchemaError(str(e), path, line_no) from e
    return (basis, labels[0], labels[1]), record


def load_counts(path: Path) -> CountsTable:
    """Read a counts file.

    Raises:
        CountsSchemaError: On an unreadable file, malformed rows, negative or
            inconsistent counts, duplicate cells or a file without records.
    """
    if not path.exists():
        raise CountsSchemaError("counts file not found", path)

    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise CountsSchemaError(f"cannot read counts file: {e}", path) from e

    records: dict[CellKey, CountRecord] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, record = _parse_line(content.split(), path, line_no)
        if key in records:
            basis, label_a, label_b = key
            raise CountsSchemaError(
                f"duplicate cell {basis.value} {label_a.value} {label_b.value}", path, line_no
            )
        records[key] = record

    if not records:
        raise CountsSchemaError("no count records", path)
    logger.debug("Loaded %d count cells from %s", len(records), path)
    return CountsTable(records)


def write_counts(table: CountsTable, path: Path) -> None:
    """Write counts in basis-pair order, one cell per line, with a column header comment."""
    basis_order = {basis: i for i, basis in enumerate(BasisPair)}
    label_order = {label: i for i, label in enumerate(IntensityLabel)}

    def sort_key(cell: CellKey) -> tuple[int, int, int]:
        basis, label_a, label_b = cell
        return basis_order[basis], label_order[label_a], label_order[label_b]

    lines = ["# " + " ".join(COLUMNS)]
    for cell in sorted(table, key=sort_key):
        basis, label_a, label_b = cell
        record = table.records[cell]
        lines.append(
            f"{basis.alice} {basis.bob} {label_a.value} {label_b.value} "
            f"{record.pairs_sent} {record.psi_plus} {record.psi_minus} "
            f"{record.err_psi_plus} {record.err_psi_minus}"
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def compute_from_counts(
    path: Path, config: RunConfig, *, point_estimates: bool = False
) -> KeyRateReport:
    """Run the finite-size pipeline on measured counts.

    With ``point_estimates`` the counts are used as k/n without fluctuation
    intervals. A zero single-photon yield gives a zero-rate report.

    Raises:
        CountsSchemaError: If the file is malformed or lacks required cells.
    """
    counts = load_counts(path)
    mode = EvaluationMode.ASYMPTOTIC if point_estimates else EvaluationMode.FINITE
    n_pairs = float(sum(record.pairs_sent for _, record in counts.items()))
    try:
        if point_estimates:
            report = asymptotic_rate_from_counts(counts, config.protocol, config.channel)
        else:
            report = finite_key_rate(counts, config.finite, config.protocol, config.channel)
    except CountsSchemaError as e:
        if e.path is not None:
            raise
        raise CountsSchemaError(str(e), path) from e
    except EstimationError as e:
        if not e.zero_yield:
            raise
        logger.info("Zero single-photon yield in %s: %s", path, e)
        report = zero_rate_report(config.protocol, config.channel, mode, str(e))
        if mode is EvaluationMode.FINITE:
            report = report.model_copy(update={"epsilon": config.finite.epsilon})
    return report.model_copy(update={"n_pairs": n_pairs})
