"""Two-decoy analytic bounds on single-photon yields and error gains.

Every bound is a linear combination of observables M^{lambda_A lambda_B} divided by
a positive constant. The coefficients are accumulated per observable before
evaluation; with interval-valued observables each coefficient then picks the end
of its interval that keeps a lower bound low (or an upper bound high).
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

from scipy.stats import poisson

from mdi_keyrate.errors import ConfigurationError, EstimationError, InvalidSettingsError
from mdi_keyrate.model.observables import (
    CORRELATION_PAIRS,
    BasisPair,
    ObservableKind,
    ObservableTable,
)
from mdi_keyrate.protocol import (
    DecoyT1Form,
    IntensityLabel,
    IntensitySettings,
    ProtocolVariant,
    SamplingScheme,
)
from mdi_keyrate.security import SinglePhotonEstimates, correlation_term

logger = logging.getLogger(__name__)

# Crossings below this are rounding noise and get snapped
CROSSING_TOL = 1e-12

VACUUM = IntensityLabel.VACUUM


class ObservableSource(Protocol):
    """Anything that can report an interval for one observable."""

    def bounds(
        self,
        basis: BasisPair,
        label_a: IntensityLabel,
        label_b: IntensityLabel,
        kind: ObservableKind,
    ) -> tuple[float, float]: ...


@dataclass(frozen=True)
class PoissonCoefficients:
    """Photon-number probabilities lambda^k e^{-lambda} / k! for k = 0, 1, 2.

    ``a``/``b`` belong to Alice's/Bob's decoy intensity, ``a_prime``/``b_prime``
    to their signal intensity.
    """

    a: tuple[float, float, float]
    b: tuple[float, float, float]
    a_prime: tuple[float, float, float]
    b_prime: tuple[float, float, float]

    @staticmethod
    def _pmf(intensity: float) -> tuple[float, float, float]:
        p0, p1, p2 = (float(p) for p in poisson.pmf([0, 1, 2], intensity))
        return p0, p1, p2

    @classmethod
    def for_intensities(
        cls, signal_a: float, decoy_a: float, signal_b: float, decoy_b: float
    ) -> PoissonCoefficients:
        return cls(
            a=cls._pmf(decoy_a),
            b=cls._pmf(decoy_b),
            a_prime=cls._pmf(signal_a),
            b_prime=cls._pmf(signal_b),
        )


class YieldBounds(NamedTuple):
    """Lower and upper bound on the single-photon yield S11."""

    lower: float
    upper: float


@dataclass
class LinearForm:
    """sum_k c_k * M_k / scale over the observables of one basis pair."""

    name: str
    scale: float
    terms: dict[tuple[IntensityLabel, IntensityLabel], float] = field(default_factory=dict)

    def add(self, label_a: IntensityLabel, label_b: IntensityLabel, coefficient: float) -> None:
        key = (label_a, label_b)
        self.terms[key] = self.terms.get(key, 0.0) + coefficient

    def evaluate(
        self,
        source: ObservableSource,
        basis: BasisPair,
        kind: ObservableKind,
        *,
        lower: bool,
        ends: dict[str, str] | None = None,
    ) -> float:
        """Worst-case value of the form over the source's intervals."""
        total = 0.0
        for (label_a, label_b), coefficient in self.terms.items():
            if coefficient == 0.0:
                continue
            lo, hi = source.bounds(basis, label_a, label_b, kind)
            use_low = (coefficient > 0.0) == lower
            total += coefficient * (lo if use_low else hi)
            if ends is not None:
                cell = f"{self.name}/{basis.value}:{label_a.value},{label_b.value}:{kind.value}"
                ends[cell] = "lower" if use_low else "upper"
        return total / self.scale


def _clamp01(value: float) -> float:
    return min(max(value, 0.0), 1.0)


def _decoy_labels(
    settings: IntensitySettings, basis: BasisPair
) -> tuple[IntensityLabel, IntensityLabel]:
    decoy = settings.decoy_label(basis)
    if decoy is None:
        raise ConfigurationError(
            f"Basis pair {basis.value} has no decoy intensity "
            f"in the {settings.scheme.value} scheme",
            key="scheme",
        )
    return settings.signal_label(basis), decoy


def _coefficients(settings: IntensitySettings, basis: BasisPair) -> PoissonCoefficients:
    signal, decoy = _decoy_labels(settings, basis)
    mu = settings.intensity(signal)
    nu = settings.intensity(decoy)
    if nu >= mu:
        raise InvalidSettingsError(mu, nu)
    return PoissonCoefficients.for_intensities(mu, nu, mu, nu)


def lower_bound_form(
    settings: IntensitySettings,
    basis: BasisPair,
    t1_form: DecoyT1Form = DecoyT1Form.SYMMETRIC,
    name: str = "lower",
) -> LinearForm:
    """(T1 - T2 - a'1 b'2 T3) / (a1 a'1 (b1 b'2 - b'1 b2)).

    T1 = a'1 b'2 M^{nu nu} + a1 b2 a'0 M^{o mu} + a1 b2 b'0 M^{mu o}
    T2 = a1 b2 M^{mu mu} + a1 b2 a'0 b'0 M^{o o}
    T3 = a0 M^{o nu} + b0 M^{nu o} - a0 b0 M^{o o}

    With ``t1_form=printed`` the M^{mu o} term carries a'0 instead of b'0.

    Raises:
        InvalidSettingsError: If the denominator is not positive.
    """
    signal, decoy = _decoy_labels(settings, basis)
    c = _coefficients(settings, basis)
    a0, a1, _ = c.a
    b0, b1, b2 = c.b
    ap0, ap1, _ = c.a_prime
    bp0, bp1, bp2 = c.b_prime

    denominator = a1 * ap1 * (b1 * bp2 - bp1 * b2)
    if denominator <= 0.0:
        raise InvalidSettingsError(
            settings.intensity(signal),
            settings.intensity(decoy),
            reason="Decoy estimator denominator b1*b'2 - b'1*b2 is not positive",
        )

    form = LinearForm(name=name, scale=denominator)
    mu_o_vacuum = bp0 if t1_form is DecoyT1Form.SYMMETRIC else ap0
    # T1
    form.add(decoy, decoy, ap1 * bp2)
    form.add(VACUUM, signal, a1 * b2 * ap0)
    form.add(signal, VACUUM, a1 * b2 * mu_o_vacuum)
    # -T2
    form.add(signal, signal, -a1 * b2)
    form.add(VACUUM, VACUUM, -a1 * b2 * ap0 * bp0)
    # -a'1 b'2 T3
    weight = ap1 * bp2
    form.add(VACUUM, decoy, -weight * a0)
    form.add(decoy, VACUUM, -weight * b0)
    form.add(VACUUM, VACUUM, weight * a0 * b0)
    return form


def upper_bound_form(
    settings: IntensitySettings, basis: BasisPair, name: str = "upper"
) -> LinearForm:
    """(M^{nu nu} - T3) / (a1 b1)."""
    _, decoy = _decoy_labels(settings, basis)
    c = _coefficients(settings, basis)
    a0, a1, _ = c.a
    b0, b1, _ = c.b

    form = LinearForm(name=name, scale=a1 * b1)
    form.add(decoy, decoy, 1.0)
    form.add(VACUUM, decoy, -a0)
    form.add(decoy, VACUUM, -b0)
    form.add(VACUUM, VACUUM, a0 * b0)
    return form


def signal_only_form(
    settings: IntensitySettings, basis: BasisPair, name: str = "signal_upper"
) -> LinearForm:
    """(M^{mu mu} - a'0 M^{o mu} - b'0 M^{mu o} + a'0 b'0 M^{o o}) / (a'1 b'1)."""
    signal = settings.signal_label(basis)
    mu = settings.intensity(signal)
    ap0, ap1, _ = PoissonCoefficients._pmf(mu)
    bp0, bp1 = ap0, ap1

    form = LinearForm(name=name, scale=ap1 * bp1)
    form.add(signal, signal, 1.0)
    form.add(VACUUM, signal, -ap0)
    form.add(signal, VACUUM, -bp0)
    form.add(VACUUM, VACUUM, ap0 * bp0)
    return form


def single_photon_yield_bounds(
    table: ObservableSource,
    basis: BasisPair,
    settings: IntensitySettings,
    t1_form: DecoyT1Form = DecoyT1Form.SYMMETRIC,
    *,
    ends: dict[str, str] | None = None,
) -> YieldBounds:
    """Lower and upper bound on S11 of one basis pair, both clamped to [0, 1].

    Raises:
        InvalidSettingsError: If the decoy is not below the signal.
        EstimationError: If the bounds cross by more than rounding noise.
    """
    gain = ObservableKind.GAIN
    lower = lower_bound_form(settings, basis, t1_form, name="s11_lower").evaluate(
        table, basis, gain, lower=True, ends=ends
    )
    upper = upper_bound_form(settings, basis, name="s11_upper").evaluate(
        table, basis, gain, lower=False, ends=ends
    )
    lower, upper = _clamp01(lower), _clamp01(upper)

    if lower > upper:
        if lower - upper > CROSSING_TOL:
            raise EstimationError(
                f"Yield bounds cross for {basis.value}: lower {lower:.6e} > upper {upper:.6e}",
                basis=basis.value,
                observable=f"s11:{basis.value}",
            )
        lower = upper
    return YieldBounds(lower, upper)


def single_photon_error_gain_upper(
    table: ObservableSource,
    basis: BasisPair,
    settings: IntensitySettings,
    use_signal_only: bool = False,
    *,
    ends: dict[str, str] | None = None,
) -> float:
    """Upper bound on the single-photon error gain eS11, clamped to [0, 1].

    The decoy form needs the decoy and vacuum cells; the signal-only form needs
    only the signal and vacuum cells, which is all the biased Z basis has.
    """
    error_gain = ObservableKind.ERROR_GAIN
    if use_signal_only:
        form = signal_only_form(settings, basis, name="es11_signal_upper")
    else:
        form = upper_bound_form(settings, basis, name="es11_upper")
    return _clamp01(form.evaluate(table, basis, error_gain, lower=False, ends=ends))


def single_photon_error_gain_lower(
    table: ObservableSource,
    basis: BasisPair,
    settings: IntensitySettings,
    t1_form: DecoyT1Form = DecoyT1Form.SYMMETRIC,
    *,
    ends: dict[str, str] | None = None,
) -> float:
    """Lower bound on eS11 via the yield lower-bound form applied to error gains.

    Returns 0 for a basis pair without a decoy intensity.
    """
    if not settings.has_decoy(basis):
        return 0.0
    form = lower_bound_form(settings, basis, t1_form, name="es11_lower")
    return _clamp01(form.evaluate(table, basis, ObservableKind.ERROR_GAIN, lower=True, ends=ends))


def t1_asymmetry(table: ObservableSource, basis: BasisPair, settings: IntensitySettings) -> float:
    """Difference between the printed and symmetric T1 variants of the yield lower bound."""
    gain = ObservableKind.GAIN
    symmetric = lower_bound_form(settings, basis, DecoyT1Form.SYMMETRIC).evaluate(
        table, basis, gain, lower=True
    )
    printed = lower_bound_form(settings, basis, DecoyT1Form.PRINTED).evaluate(
        table, basis, gain, lower=True
    )
    return printed - symmetric


def flip_table(table: ObservableTable, basis: BasisPair) -> ObservableTable:
    """Apply Bob's bit flip to every cell of one basis pair: EQ := Q - EQ."""
    return table.with_flip(basis)


def pooled_yield_bounds(yields: Mapping[BasisPair, YieldBounds]) -> YieldBounds | None:
    """Tightest S11 bound shared by every basis pair in ``yields``.

    Single-photon states average to the maximally mixed state in every basis,
    so S11 is one number for all pairs: the largest lower bound and the
    smallest upper bound both hold. Returns None when they cross.
    """
    lower = max(bounds.lower for bounds in yields.values())
    upper = min(bounds.upper for bounds in yields.values())
    if lower - upper > CROSSING_TOL:
        return None
    return YieldBounds(min(lower, upper), upper)


def _correlation_yields(
    table: ObservableSource,
    pairs: tuple[BasisPair, ...],
    settings: IntensitySettings,
    t1_form: DecoyT1Form,
    ends: dict[str, str] | None = None,
) -> dict[BasisPair, YieldBounds]:
    yields = {
        basis: single_photon_yield_bounds(table, basis, settings, t1_form, ends=ends)
        for basis in pairs
    }
    pooled = pooled_yield_bounds(yields)
    if pooled is None:
        logger.warning(
            "Yield bounds of %s are inconsistent; keeping per-pair bounds",
            ", ".join(b.value for b in pairs),
        )
        return yields
    return dict.fromkeys(pairs, pooled)


def _pair_error_bounds(
    table: ObservableSource,
    basis: BasisPair,
    settings: IntensitySettings,
    yields: YieldBounds,
    t1_form: DecoyT1Form,
    ends: dict[str, str] | None = None,
) -> tuple[float, float]:
    # Both upper forms are valid; the smaller one is kept
    es_hi = min(
        single_photon_error_gain_upper(table, basis, settings, ends=ends),
        single_photon_error_gain_upper(table, basis, settings, use_signal_only=True, ends=ends),
    )
    es_lo = single_photon_error_gain_lower(table, basis, settings, t1_form, ends=ends)
    return _error_rate_bounds(es_lo, es_hi, yields.lower, yields.upper)


def flip_decisions(
    table: ObservableSource,
    mirrored: ObservableSource,
    settings: IntensitySettings,
    bases: Iterable[BasisPair] = CORRELATION_PAIRS,
    t1_form: DecoyT1Form = DecoyT1Form.SYMMETRIC,
) -> frozenset[BasisPair]:
    """Basis pairs to flip, chosen on the error intervals of both orientations.

    ``mirrored`` carries the same data with Bob's bits inverted on every pair.
    Both orientations bound the same correlation, so each pair keeps the one
    whose single-photon error interval stays further from 0.5. Ties keep the
    data as measured. Yields do not change under a flip and are read from
    ``table``.
    """
    pairs = tuple(bases)
    yields = _correlation_yields(table, pairs, settings, t1_form)
    flips = set()
    for basis in pairs:
        if yields[basis].lower <= 0.0:
            continue
        kept = correlation_term(*_pair_error_bounds(table, basis, settings, yields[basis], t1_form))
        inverted = correlation_term(
            *_pair_error_bounds(mirrored, basis, settings, yields[basis], t1_form)
        )
        if inverted > kept:
            flips.add(basis)
    return frozenset(flips)


def _error_rate_bounds(
    es_lower: float, es_upper: float, s_lower: float, s_upper: float
) -> tuple[float, float]:
    """e^{11U} = eS^U / S^L and e^{11L} = eS^L / S^U, clamped and ordered."""
    upper = min(1.0, es_upper / s_lower)
    lower = min(es_lower / s_upper, upper) if s_upper > 0.0 else 0.0
    return _clamp01(lower), upper


def estimate_all_bases(
    table: ObservableSource,
    settings: IntensitySettings,
    variant: ProtocolVariant = ProtocolVariant.RFI,
    *,
    t1_form: DecoyT1Form = DecoyT1Form.SYMMETRIC,
    flipped: frozenset[BasisPair] | None = None,
    ends: dict[str, str] | None = None,
) -> SinglePhotonEstimates:
    """Bound every single-photon quantity the security analysis needs.

    When ``flipped`` is None the source must be a point-valued ObservableTable
    and the flips are decided here with ``flip_decisions``. Otherwise the flips
    are taken as already applied to the source.

    The X/Y pairs share one pooled S11 bound. The biased scheme has no Z-basis
    decoy, so the key yield bound is that pooled bound and the Z error bound
    uses the signal-only form.

    Raises:
        EstimationError: If a yield bound the key rate depends on is zero
            (``zero_yield`` set) or bounds cross.
    """
    pairs = CORRELATION_PAIRS if variant is ProtocolVariant.RFI else (BasisPair.XX,)

    if flipped is None:
        if not isinstance(table, ObservableTable):
            raise TypeError("Flip decisions need a point-valued ObservableTable")
        mirrored = table
        for basis in pairs:
            mirrored = flip_table(mirrored, basis)
        flipped = flip_decisions(table, mirrored, settings, pairs, t1_form)
        for basis in sorted(flipped, key=lambda b: b.value):
            table = flip_table(table, basis)
    if flipped:
        logger.debug("Flipped basis pairs: %s", ", ".join(sorted(b.value for b in flipped)))

    biased = settings.scheme is SamplingScheme.BIASED
    required = {BasisPair.XX} if (biased or variant is ProtocolVariant.ORIGINAL) else set()

    yields = _correlation_yields(table, pairs, settings, t1_form, ends)
    s11_lower = {basis: bounds.lower for basis, bounds in yields.items()}
    s11_upper = {basis: bounds.upper for basis, bounds in yields.items()}
    e11_lower: dict[BasisPair, float] = {}
    e11_upper: dict[BasisPair, float] = {}
    failed: set[BasisPair] = set()
    asymmetry = max(abs(t1_asymmetry(table, basis, settings)) for basis in pairs)

    for basis in pairs:
        if yields[basis].lower <= 0.0:
            if basis in required:
                raise EstimationError(
                    f"Single-photon yield lower bound of {basis.value} is zero",
                    basis=basis.value,
                    observable=f"s11_lower:{basis.value}",
                    zero_yield=True,
                )
            # No usable correlation: the pair contributes nothing to C
            failed.add(basis)
            e11_lower[basis], e11_upper[basis] = 0.0, 0.5
            logger.info("Zero yield bound for %s; treated as uncorrelated", basis.value)
            continue
        e11_lower[basis], e11_upper[basis] = _pair_error_bounds(
            table, basis, settings, yields[basis], t1_form, ends
        )

    key = BasisPair.ZZ
    if biased:
        s_zz_lower = s11_lower[BasisPair.XX]
        es_hi = single_photon_error_gain_upper(
            table, key, settings, use_signal_only=True, ends=ends
        )
        e_zz_lower, e_zz_upper = 0.0, min(1.0, es_hi / s_zz_lower)
    else:
        s_zz_lower, s_zz_upper = single_photon_yield_bounds(
            table, key, settings, t1_form, ends=ends
        )
        s11_lower[key], s11_upper[key] = s_zz_lower, s_zz_upper
        if s_zz_lower <= 0.0:
            raise EstimationError(
                "Single-photon yield lower bound of ZZ is zero",
                basis=key.value,
                observable="s11_lower:ZZ",
                zero_yield=True,
            )
        es_hi = single_photon_error_gain_upper(table, key, settings, ends=ends)
        es_lo = single_photon_error_gain_lower(table, key, settings, t1_form, ends=ends)
        e_zz_lower, e_zz_upper = _error_rate_bounds(es_lo, es_hi, s_zz_lower, s_zz_upper)

    if asymmetry > CROSSING_TOL:
        logger.warning("Printed and symmetric T1 variants differ by %.3e", asymmetry)

    return SinglePhotonEstimates(
        s_zz_11_lower=s_zz_lower,
        e_zz_11_upper=e_zz_upper,
        e_zz_11_lower=e_zz_lower,
        e11_lower=e11_lower,
        e11_upper=e11_upper,
        s11_lower=s11_lower,
        s11_upper=s11_upper,
        flipped=flipped,
        failed=frozenset(failed),
        t1_asymmetry=asymmetry,
    )
