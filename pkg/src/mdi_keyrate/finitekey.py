"""Finite-size analysis: counts, Chernoff intervals and their propagation to a key rate."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field

from pydantic import BaseModel, Field

from mdi_keyrate.decoy import estimate_all_bases, flip_decisions
from mdi_keyrate.errors import CountsSchemaError, DomainError, EstimationError
from mdi_keyrate.model.channel import ChannelParams
from mdi_keyrate.model.observables import (
    CORRELATION_PAIRS,
    BasisPair,
    CellKey,
    GainErrorRecord,
    IntensityPair,
    ObservableKind,
    ObservableTable,
    pair_observables,
)
from mdi_keyrate.protocol import (
    EvaluationMode,
    IntensityLabel,
    IntensitySettings,
    PrefactorMode,
    ProtocolConfig,
    ProtocolVariant,
)
from mdi_keyrate.security import KeyRateReport, key_rate_from_estimates

logger = logging.getLogger(__name__)

BoundedKey = tuple[BasisPair, IntensityLabel, IntensityLabel, ObservableKind]


class FiniteKeyConfig(BaseModel):
    """Data size and per-bound failure probability."""

    n_pairs: float = Field(default=3e12, ge=1.0, description="Transmitted pulse pairs")
    epsilon: float = Field(default=1e-10, gt=0.0, lt=1.0, description="Failure per bound")


@dataclass(frozen=True)
class BoundedObservable:
    """Confidence interval on an expected rate, 0 <= lower <= upper <= 1."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.lower <= self.upper <= 1.0):
            raise DomainError(f"Invalid interval [{self.lower!r}, {self.upper!r}]")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


def chernoff_interval(k: int, n: int, epsilon: float) -> BoundedObservable:
    """Interval on the expected rate behind ``k`` successes in ``n`` trials.

    With beta = ln(1/epsilon) the expected count lies in
    [k - sqrt(2 k beta), k + beta + sqrt(2 k beta + beta^2)], floored at 0,
    capped at n and divided by n. An empty sample (n = 0) carries no
    information and yields [0, 1].

    Raises:
        DomainError: If k > n, a count is negative or epsilon is outside (0, 1).
    """
    if k < 0 or n < 0:
        raise DomainError(f"Counts must be non-negative, got k={k}, n={n}")
    if k > n:
        raise DomainError(f"Observed count {k} exceeds trials {n}")
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if n == 0:
        return BoundedObservable(0.0, 1.0)

    beta = -math.log(epsilon)
    spread = math.sqrt(2.0 * k * beta)
    low = max(0.0, k - spread)
    high = min(float(n), k + beta + math.sqrt(2.0 * k * beta + beta * beta))
    return BoundedObservable(low / n, high / n)


@dataclass(frozen=True)
class CountRecord:
    """Raw counts of one cell, split by the announced Bell state."""

    pairs_sent: int
    psi_plus: int
    psi_minus: int
    err_psi_plus: int
    err_psi_minus: int

    def __post_init__(self) -> None:
        values = (
            self.pairs_sent,
            self.psi_plus,
            self.psi_minus,
            self.err_psi_plus,
            self.err_psi_minus,
        )
        if any(v < 0 for v in values):
            raise DomainError("Counts must be non-negative")
        if self.err_psi_plus > self.psi_plus or self.err_psi_minus > self.psi_minus:
            raise DomainError("Error counts exceed coincidence counts")
        if self.coincidences > self.pairs_sent:
            raise DomainError("Coincidences exceed pairs sent")

    @property
    def coincidences(self) -> int:
        return self.psi_plus + self.psi_minus

    @property
    def errors(self) -> int:
        return self.err_psi_plus + self.err_psi_minus

    def flipped(self) -> CountRecord:
        """Counts after Bob inverts his bits: every correct event becomes an error."""
        return CountRecord(
            pairs_sent=self.pairs_sent,
            psi_plus=self.psi_plus,
            psi_minus=self.psi_minus,
            err_psi_plus=self.psi_plus - self.err_psi_plus,
            err_psi_minus=self.psi_minus - self.err_psi_minus,
        )

    def point(self) -> GainErrorRecord:
        """Point estimates q = coincidences/n and eq = errors/n."""
        if self.pairs_sent == 0:
            return GainErrorRecord(0.0, 0.0)
        return GainErrorRecord.clamped(
            self.coincidences / self.pairs_sent, self.errors / self.pairs_sent
        )


@dataclass(frozen=True)
class CountsTable:
    """Counts indexed by (basis pair, Alice label, Bob label)."""

    records: Mapping[CellKey, CountRecord] = field(default_factory=dict)

    def __contains__(self, key: object) -> bool:
        return key in self.records

    def __iter__(self) -> Iterator[CellKey]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def items(self) -> Iterator[tuple[CellKey, CountRecord]]:
        return iter(self.records.items())

    def missing(self, cells: list[CellKey]) -> list[CellKey]:
        return [cell for cell in cells if cell not in self.records]

    def point_table(self) -> ObservableTable:
        return ObservableTable({key: record.point() for key, record in self.records.items()})

    def with_flip(self, basis: BasisPair) -> CountsTable:
        return CountsTable(
            {
                key: (record.flipped() if key[0] is basis else record)
                for key, record in self.records.items()
            }
        )


@dataclass(frozen=True)
class BoundedObservableTable:
    """Interval-valued observables; an ObservableSource for the decoy estimators."""

    records: Mapping[BoundedKey, BoundedObservable]

    def bounds(
        self,
        basis: BasisPair,
        label_a: IntensityLabel,
        label_b: IntensityLabel,
        kind: ObservableKind,
    ) -> tuple[float, float]:
        try:
            interval = self.records[(basis, label_a, label_b, kind)]
        except KeyError:
            raise EstimationError(
                f"Missing observable {kind.value} {basis.value} {label_a.value},{label_b.value}",
                basis=basis.value,
                observable=f"{basis.value}:{label_a.value},{label_b.value}:{kind.value}",
            ) from None
        return interval.lower, interval.upper

    @property
    def n_bounds(self) -> int:
        """Number of intervals formed, each failing with probability epsilon."""
        return len(self.records)

    def count(self, bases: Iterable[BasisPair], kind: ObservableKind) -> int:
        """Number of ``kind`` intervals on the given basis pairs."""
        wanted = set(bases)
        return sum(1 for basis, _, _, k in self.records if basis in wanted and k is kind)

    def with_bases_from(
        self, other: BoundedObservableTable, bases: Iterable[BasisPair]
    ) -> BoundedObservableTable:
        """Copy whose cells of ``bases`` come from ``other``."""
        taken = set(bases)
        records = {key: value for key, value in self.records.items() if key[0] not in taken}
        records.update((key, value) for key, value in other.records.items() if key[0] in taken)
        return BoundedObservableTable(records)


def required_cells(
    settings: IntensitySettings, variant: ProtocolVariant = ProtocolVariant.RFI
) -> list[CellKey]:
    """Every (basis pair, label pair) cell the protocol's estimators read."""
    if variant is ProtocolVariant.RFI:
        bases: tuple[BasisPair, ...] = (BasisPair.ZZ, *CORRELATION_PAIRS)
    else:
        bases = (BasisPair.ZZ, BasisPair.XX)
    cells: list[CellKey] = []
    for basis in bases:
        labels = settings.labels_for(basis)
        cells.extend((basis, label_a, label_b) for label_a in labels for label_b in labels)
    return cells


def synthesize_counts(
    protocol: ProtocolConfig, channel: ChannelParams, n_pairs: float
) -> CountsTable:
    """Expected counts from the channel model, rounded to integers.

    Coincidences and errors are split evenly between psi+ and psi-.
    """
    settings = protocol.intensity_settings()
    beta = protocol.misalignment
    records: dict[CellKey, CountRecord] = {}

    for cell in required_cells(settings, protocol.variant):
        basis, label_a, label_b = cell
        pairs_sent = int(round(n_pairs * protocol.pair_fraction(basis, label_a, label_b)))
        intensities = IntensityPair(settings.intensity(label_a), settings.intensity(label_b))
        record = pair_observables(channel, beta, intensities, basis)
        hits = min(int(pairs_sent * record.q + 0.5), pairs_sent)
        errors = min(int(pairs_sent * record.eq + 0.5), hits)
        records[cell] = CountRecord(
            pairs_sent=pairs_sent,
            psi_plus=hits // 2,
            psi_minus=hits - hits // 2,
            err_psi_plus=errors // 2,
            err_psi_minus=errors - errors // 2,
        )

    logger.debug("Synthesized %d count cells for N=%.3g", len(records), n_pairs)
    return CountsTable(records)


def apply_fluctuations(counts: CountsTable, config: FiniteKeyConfig) -> BoundedObservableTable:
    """Replace every gain and error gain by its Chernoff interval."""
    records: dict[BoundedKey, BoundedObservable] = {}
    for (basis, label_a, label_b), record in counts.items():
        n = record.pairs_sent
        records[(basis, label_a, label_b, ObservableKind.GAIN)] = chernoff_interval(
            record.coincidences, n, config.epsilon
        )
        records[(basis, label_a, label_b, ObservableKind.ERROR_GAIN)] = chernoff_interval(
            record.errors, n, config.epsilon
        )
    return BoundedObservableTable(records)


def _check_complete(counts: CountsTable, protocol: ProtocolConfig) -> IntensitySettings:
    settings = protocol.intensity_settings()
    missing = counts.missing(required_cells(settings, protocol.variant))
    if missing:
        names = ", ".join(f"{b.value} {a.value} {c.value}" for b, a, c in missing[:6])
        more = f" (+{len(missing) - 6} more)" if len(missing) > 6 else ""
        raise CountsSchemaError(f"Missing required cells: {names}{more}")
    return settings


def finite_key_rate(
    counts: CountsTable,
    config: FiniteKeyConfig,
    protocol: ProtocolConfig,
    channel: ChannelParams,
) -> KeyRateReport:
    """Key rate with every observable replaced by the worst end of its interval.

    Intervals are formed on the counts as measured and on the counts with
    Bob's bits inverted; each basis pair then keeps the orientation whose
    error interval is tighter (see ``flip_decisions``). Sifting prefactors
    always follow the sampling probabilities here.

    Raises:
        CountsSchemaError: If required cells are missing.
        EstimationError: If a bound cannot be formed; the error names the observable.
    """
    settings = _check_complete(counts, protocol)
    pairs = CORRELATION_PAIRS if protocol.variant is ProtocolVariant.RFI else (BasisPair.XX,)

    inverted = counts
    for basis in pairs:
        inverted = inverted.with_flip(basis)
    measured = apply_fluctuations(counts, config)
    mirrored = apply_fluctuations(inverted, config)
    flips = flip_decisions(measured, mirrored, settings, pairs, protocol.decoy_t1)
    bounded = measured.with_bases_from(mirrored, flips)
    n_bounds = measured.n_bounds + mirrored.count(pairs, ObservableKind.ERROR_GAIN)

    ends: dict[str, str] = {}
    estimates = estimate_all_bases(
        bounded, settings, protocol.variant, t1_form=protocol.decoy_t1, flipped=flips, ends=ends
    )

    signal = settings.signal_label(BasisPair.ZZ)
    q_lo, q_hi = bounded.bounds(BasisPair.ZZ, signal, signal, ObservableKind.GAIN)
    _, eq_hi = bounded.bounds(BasisPair.ZZ, signal, signal, ObservableKind.ERROR_GAIN)
    e_zz = eq_hi / q_lo if q_lo > 0.0 else 0.5
    cell = f"ZZ:{signal.value},{signal.value}"
    ends[f"leak/{cell}:q"] = "upper"
    ends[f"leak/{cell}:eq"] = "upper"
    ends[f"leak_rate/{cell}:q"] = "lower"

    report = key_rate_from_estimates(
        estimates,
        q_zz=q_hi,
        e_zz=e_zz,
        protocol=protocol,
        f_ec=channel.f_ec,
        mode=EvaluationMode.FINITE,
        prefactors=PrefactorMode.SAMPLING,
    )
    logger.info("Finite-key rate %.4e (eps=%.1e, %d bounds)", report.rate, config.epsilon, n_bounds)
    return report.model_copy(
        update={
            "n_pairs": config.n_pairs,
            "epsilon": config.epsilon,
            "n_bounds": n_bounds,
            "total_failure_probability": n_bounds * config.epsilon,
            "bound_ends": ends,
            "channel": channel.model_dump(mode="json"),
        }
    )


def asymptotic_rate_from_counts(
    counts: CountsTable,
    protocol: ProtocolConfig,
    channel: ChannelParams,
    prefactors: PrefactorMode | None = None,
) -> KeyRateReport:
    """Key rate of the point estimates k/n, without fluctuation intervals."""
    settings = _check_complete(counts, protocol)
    table = counts.point_table()
    estimates = estimate_all_bases(table, settings, protocol.variant, t1_form=protocol.decoy_t1)

    signal = settings.signal_label(BasisPair.ZZ)
    record = table.get(BasisPair.ZZ, signal, signal)
    report = key_rate_from_estimates(
        estimates,
        q_zz=record.q,
        e_zz=record.e or 0.0,
        protocol=protocol,
        f_ec=channel.f_ec,
        mode=EvaluationMode.ASYMPTOTIC,
        prefactors=prefactors,
    )
    return report.model_copy(update={"channel": channel.model_dump(mode="json")})
