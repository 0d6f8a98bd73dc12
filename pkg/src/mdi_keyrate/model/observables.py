"""Gains and error gains of the Bell-state measurement for weak coherent pulses.

The closed forms are evaluated in a rearranged but algebraically identical way:
with ``j(z) = I0(z) - 1`` and ``1 - y`` computed through ``expm1``, the weak
decoy intensities keep full relative precision instead of losing it to
differences of numbers close to one.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

from mdi_keyrate.errors import ConfigurationError, DomainError, EstimationError
from mdi_keyrate.model.bessel import bessel_i0_minus_one
from mdi_keyrate.model.channel import Arm, ChannelParams, MisalignmentAngle, link_efficiency

if TYPE_CHECKING:
    from mdi_keyrate.protocol import IntensityLabel, ProtocolConfig

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


class BasisPair(str, Enum):
    """Basis choices of Alice and Bob for one announced event."""

    ZZ = "ZZ"
    XX = "XX"
    YY = "YY"
    XY = "XY"
    YX = "YX"

    @property
    def alice(self) -> str:
        return self.value[0]

    @property
    def bob(self) -> str:
        return self.value[1]

    @property
    def is_key(self) -> bool:
        """Whether this pair produces key bits."""
        return self is BasisPair.ZZ

    @classmethod
    def from_letters(cls, alice: str, bob: str) -> BasisPair:
        """Look up a pair from single-letter basis names (case-insensitive)."""
        return cls(f"{alice}{bob}".upper())


# Pairs entering the quantity C
CORRELATION_PAIRS: tuple[BasisPair, ...] = (
    BasisPair.XX,
    BasisPair.XY,
    BasisPair.YX,
    BasisPair.YY,
)


class ObservableKind(str, Enum):
    """Which observable of a cell: the gain or the error gain."""

    GAIN = "q"
    ERROR_GAIN = "eq"


@dataclass(frozen=True)
class IntensityPair:
    """Mean photon numbers sent by Alice and Bob; 0 is the vacuum state."""

    lambda_a: float
    lambda_b: float

    def __post_init__(self) -> None:
        for name in ("lambda_a", "lambda_b"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{name} must be a finite value >= 0, got {value!r}")


@dataclass(frozen=True)
class ModelIntermediates:
    """Intermediate quantities of the gain formulas, exposed for audit."""

    mu_prime: float
    x: float
    y: float
    one_minus_y: float
    q_c: float
    q_e: float
    b_arg: float
    e_arg: float
    theta: float
    xi: float


@dataclass(frozen=True)
class GainErrorRecord:
    """Gain ``q`` and error gain ``eq`` of one cell, with ``0 <= eq <= q <= 1``."""

    q: float
    eq: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.eq <= self.q <= 1.0):
            raise DomainError(f"Record violates 0 <= eq <= q <= 1: q={self.q!r}, eq={self.eq!r}")

    @property
    def defined(self) -> bool:
        """False when the gain vanishes and no error rate exists."""
        return self.q > 0.0

    @property
    def e(self) -> float | None:
        """Error rate eq/q, or None when the gain is zero."""
        return self.eq / self.q if self.q > 0.0 else None

    def flipped(self) -> GainErrorRecord:
        """Record after Bob inverts every bit of this cell."""
        return GainErrorRecord(q=self.q, eq=self.q - self.eq)

    @classmethod
    def clamped(cls, q: float, eq: float) -> GainErrorRecord:
        """Build a record after clipping rounding noise into 0 <= eq <= q <= 1."""
        q_c = min(max(q, 0.0), 1.0)
        return cls(q=q_c, eq=min(max(eq, 0.0), q_c))


def model_intermediates(
    params: ChannelParams, beta: MisalignmentAngle, intensities: IntensityPair
) -> ModelIntermediates:
    """Compute the shared intermediates for one intensity pair."""
    a = link_efficiency(params, Arm.ALICE) * intensities.lambda_a
    b = link_efficiency(params, Arm.BOB) * intensities.lambda_b
    p_d = params.p_d
    keep = 1.0 - p_d

    mu_prime = a + b
    x = math.sqrt(a * b) / 2.0
    s = mu_prime / 4.0
    y = keep * math.exp(-s)
    one_minus_y = -math.expm1(-s) + p_d * math.exp(-s)

    half_decay = math.exp(-mu_prime / 2.0)
    # 1 - (1 - P_d) e^{-a/2}, per arm
    click_a = -math.expm1(-a / 2.0) + p_d * math.exp(-a / 2.0)
    click_b = -math.expm1(-b / 2.0) + p_d * math.exp(-b / 2.0)
    q_c = 2.0 * keep * keep * half_decay * click_a * click_b
    # I0(2x) - (1 - P_d) e^{-mu'/2}
    excess = bessel_i0_minus_one(2.0 * x) - math.expm1(-mu_prime / 2.0) + p_d * half_decay
    q_e = 2.0 * p_d * keep * keep * half_decay * excess

    return ModelIntermediates(
        mu_prime=mu_prime,
        x=x,
        y=y,
        one_minus_y=one_minus_y,
        q_c=q_c,
        q_e=q_e,
        b_arg=2.0 * x * beta.cos,
        e_arg=2.0 * x * beta.sin,
        theta=SQRT2 * x * (beta.cos + beta.sin),
        xi=SQRT2 * x * (beta.cos - beta.sin),
    )


def pair_observables(
    params: ChannelParams,
    beta: MisalignmentAngle,
    intensities: IntensityPair,
    basis: BasisPair,
) -> GainErrorRecord:
    """Gain and error gain of one basis pair at one intensity pair.

    ZZ counts coincidences with the correct (Q_C) or erroneous (Q_E) detector
    pattern; the X/Y pairs follow the phase-randomized interference expressions.
    YY equals XX and the YX gain equals the XY gain; the YX error gain swaps the
    roles of the two interference terms.
    """
    m = model_intermediates(params, beta, intensities)
    e_d = params.e_d

    if basis is BasisPair.ZZ:
        q = m.q_c + m.q_e
        eq = e_d * m.q_c + (1.0 - e_d) * m.q_e
        return GainErrorRecord.clamped(q, eq)

    j = bessel_i0_minus_one
    prefactor = 2.0 * m.y * m.y
    omy_sq = m.one_minus_y * m.one_minus_y
    cross = m.y * j(m.x)

    if basis in (BasisPair.XX, BasisPair.YY):
        first, second = j(m.b_arg), j(m.e_arg)
        q = prefactor * (2.0 * omy_sq - 4.0 * cross + first + second)
        eq = prefactor * (omy_sq - 2.0 * cross + e_d * first + (1.0 - e_d) * second)
    else:
        big, small = j(m.theta), j(m.xi)
        q = prefactor * (2.0 * omy_sq - 4.0 * cross + big + small)
        if basis is BasisPair.XY:
            eq = prefactor * (omy_sq - 2.0 * cross + e_d * small + (1.0 - e_d) * big)
        else:
            eq = prefactor * (omy_sq - 2.0 * cross + e_d * big + (1.0 - e_d) * small)

    return GainErrorRecord.clamped(q, eq)


CellKey = tuple[BasisPair, "IntensityLabel", "IntensityLabel"]


@dataclass(frozen=True)
class ObservableTable:
    """Gains and error gains indexed by (basis pair, Alice label, Bob label).

    Doubles as the point-valued observable source of the decoy estimators:
    ``bounds`` returns the same value for both ends.
    """

    records: Mapping[CellKey, GainErrorRecord] = field(default_factory=dict)

    def __contains__(self, key: object) -> bool:
        return key in self.records

    def __iter__(self) -> Iterator[CellKey]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def get(
        self, basis: BasisPair, label_a: IntensityLabel, label_b: IntensityLabel
    ) -> GainErrorRecord:
        """Return one record.

        Raises:
            EstimationError: If the cell is not in the table.
        """
        try:
            return self.records[(basis, label_a, label_b)]
        except KeyError:
            raise EstimationError(
                f"Missing observable {basis.value} {label_a.value},{label_b.value}",
                basis=basis.value,
                observable=f"{basis.value}:{label_a.value},{label_b.value}",
            ) from None

    def value(
        self,
        basis: BasisPair,
        label_a: IntensityLabel,
        label_b: IntensityLabel,
        kind: ObservableKind,
    ) -> float:
        """M^{label_a label_b} for one basis pair, M in {Q, EQ}."""
        record = self.get(basis, label_a, label_b)
        return record.q if kind is ObservableKind.GAIN else record.eq

    def bounds(
        self,
        basis: BasisPair,
        label_a: IntensityLabel,
        label_b: IntensityLabel,
        kind: ObservableKind,
    ) -> tuple[float, float]:
        value = self.value(basis, label_a, label_b, kind)
        return value, value

    def bases(self) -> set[BasisPair]:
        return {key[0] for key in self.records}

    def with_flip(self, basis: BasisPair) -> ObservableTable:
        """Return a copy with every cell of ``basis`` bit-flipped."""
        return ObservableTable(
            {
                key: (record.flipped() if key[0] is basis else record)
                for key, record in self.records.items()
            }
        )


def observable_table(config: ProtocolConfig, params: ChannelParams) -> ObservableTable:
    """Evaluate every (basis pair, intensity pair) cell the protocol needs.

    Vacuum cells use lambda = 0, so the table carries the single-sided and
    double-vacuum entries the decoy bounds reference.

    Raises:
        ConfigurationError: If a basis asks for an intensity the protocol does not define.
    """
    settings = config.intensity_settings()
    beta = config.misalignment
    records: dict[CellKey, GainErrorRecord] = {}

    for basis in BasisPair:
        labels = settings.labels_for(basis)
        for label_a in labels:
            for label_b in labels:
                try:
                    pair = IntensityPair(settings.intensity(label_a), settings.intensity(label_b))
                except DomainError as e:
                    raise ConfigurationError(str(e), key=label_a.value) from e
                records[(basis, label_a, label_b)] = pair_observables(params, beta, pair, basis)

    logger.debug(
        "Observable table: %d cells at %.3g/%.3g km, beta=%.3g deg",
        len(records),
        params.dist_a,
        params.dist_b,
        beta.degrees,
    )
    return ObservableTable(records)
