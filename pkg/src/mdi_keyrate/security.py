"""Entropy, the correlation quantity C, Eve's information and the secret key rate."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import minimize_scalar
from scipy.special import entr

from mdi_keyrate.errors import DomainError, EstimationError
from mdi_keyrate.model.observables import CORRELATION_PAIRS, BasisPair
from mdi_keyrate.protocol import (
    EvaluationMode,
    IEBound,
    PrefactorMode,
    ProtocolConfig,
    ProtocolVariant,
)

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
C_MAX = 4.0

# Grid used to bracket the maximum of I_E over an error-rate interval
WORST_CASE_GRID = 33


def _check_probability(name: str, value: float, upper: float = 1.0) -> float:
    if not (0.0 <= value <= upper):
        raise DomainError(f"{name} must lie in [0, {upper:g}], got {value!r}")
    return float(value)


def binary_entropy(x: float) -> float:
    """H(x) = -x log2 x - (1-x) log2 (1-x), with H(0) = H(1) = 0.

    Raises:
        DomainError: If ``x`` is outside [0, 1].
    """
    x = _check_probability("Entropy argument", x)
    return float((entr(x) + entr(1.0 - x)) / LN2)


@dataclass(frozen=True)
class SinglePhotonEstimates:
    """Single-photon bounds feeding the information bounds.

    ``e11_lower``/``e11_upper`` hold the error-rate bounds of the X/Y pairs that
    were estimated (all four for the RFI analysis, XX alone for the original one).
    """

    s_zz_11_lower: float
    e_zz_11_upper: float
    e_zz_11_lower: float = 0.0
    e11_lower: Mapping[BasisPair, float] = field(default_factory=dict)
    e11_upper: Mapping[BasisPair, float] = field(default_factory=dict)
    s11_lower: Mapping[BasisPair, float] = field(default_factory=dict)
    s11_upper: Mapping[BasisPair, float] = field(default_factory=dict)
    flipped: frozenset[BasisPair] = frozenset()
    failed: frozenset[BasisPair] = frozenset()
    t1_asymmetry: float = 0.0

    def __post_init__(self) -> None:
        _check_probability("s_zz_11_lower", self.s_zz_11_lower)
        _check_probability("e_zz_11_upper", self.e_zz_11_upper)
        _check_probability("e_zz_11_lower", self.e_zz_11_lower)
        if self.e_zz_11_lower > self.e_zz_11_upper:
            raise DomainError("e_zz_11_lower exceeds e_zz_11_upper")
        for basis, upper in self.e11_upper.items():
            _check_probability(f"e11_upper[{basis.value}]", upper)
            lower = self.e11_lower.get(basis, 0.0)
            _check_probability(f"e11_lower[{basis.value}]", lower)
            if lower > upper:
                raise DomainError(f"e11 bounds cross for {basis.value}: {lower!r} > {upper!r}")


@dataclass(frozen=True)
class SecurityQuantities:
    """C together with the u, v parameters and Eve's information they imply."""

    c_value: float
    u: float
    v: float
    i_e: float


def _required_upper(estimates: SinglePhotonEstimates, basis: BasisPair) -> float:
    try:
        return estimates.e11_upper[basis]
    except KeyError:
        raise EstimationError(
            f"No single-photon error bound for {basis.value}",
            basis=basis.value,
            observable=f"e11_upper:{basis.value}",
        ) from None


def c_quantity(estimates: SinglePhotonEstimates) -> float:
    """C = sum over XX, XY, YX, YY of (1 - 2*min(0.5, e^U))^2.

    Raises:
        EstimationError: If any of the four upper bounds is missing.
    """
    total = 0.0
    for basis in CORRELATION_PAIRS:
        e = min(0.5, _required_upper(estimates, basis))
        total += (1.0 - 2.0 * e) ** 2
    return total


def correlation_term(e_lower: float, e_upper: float) -> float:
    """Smallest (1 - 2e)^2 over [e_lower, e_upper]; zero when 0.5 lies inside."""
    if e_lower <= 0.5 <= e_upper:
        return 0.0
    return min((1.0 - 2.0 * e_lower) ** 2, (1.0 - 2.0 * e_upper) ** 2)


def c_quantity_two_sided(estimates: SinglePhotonEstimates) -> float:
    """Lower bound on C using both ends of each error-rate interval.

    Each term is the minimum of (1 - 2e)^2 over [e^L, e^U], which is zero when
    the interval contains 0.5; the result is unchanged when any interval is
    mirrored to [1 - e^U, 1 - e^L].
    """
    return sum(
        correlation_term(estimates.e11_lower.get(basis, 0.0), _required_upper(estimates, basis))
        for basis in CORRELATION_PAIRS
    )


def rfi_security_quantities(
    e_zz_11_upper: float, c_value: float, bound: IEBound = IEBound.PRINTED
) -> SecurityQuantities:
    """Evaluate u, v and I_E of the reference-frame-independent bound.

    ``printed`` uses u = min(C/2/(1-e), 1); ``root`` uses u = min(sqrt(C/2)/(1-e), 1).
    The radicand of v is floored at 0 and v is clamped to [0, 1]; at e = 0 the
    bound reduces to H((1+u)/2).

    Raises:
        DomainError: If e is outside [0, 0.5] or C outside [0, 4].
    """
    e = _check_probability("e_zz_11_upper", e_zz_11_upper, upper=0.5)
    if not (0.0 <= c_value <= C_MAX):
        raise DomainError(f"C must lie in [0, {C_MAX:g}], got {c_value!r}")

    half_c = c_value / 2.0
    numerator = math.sqrt(half_c) if bound is IEBound.ROOT else half_c
    u = min(numerator / (1.0 - e), 1.0)
    radicand = max(0.0, half_c - (1.0 - e) ** 2 * u * u)

    if e == 0.0:
        v = 1.0 if radicand > 0.0 else 0.0
        i_e = binary_entropy((1.0 + u) / 2.0)
    else:
        v = min(math.sqrt(radicand) / e, 1.0)
        i_e = (1.0 - e) * binary_entropy((1.0 + u) / 2.0) + e * binary_entropy((1.0 + v) / 2.0)

    return SecurityQuantities(c_value=c_value, u=u, v=v, i_e=min(max(i_e, 0.0), 1.0))


def eve_information_rfi(
    e_zz_11_upper: float, c_value: float, bound: IEBound = IEBound.PRINTED
) -> float:
    """Eve's information per sifted bit for the RFI analysis."""
    return rfi_security_quantities(e_zz_11_upper, c_value, bound).i_e


def eve_information_worst_case(
    e_lower: float, e_upper: float, c_value: float, bound: IEBound = IEBound.PRINTED
) -> float:
    """Maximum of I_E over e in [e_lower, e_upper].

    I_E is not monotone in the Z-basis error rate. The key rate uses the value
    at e^U; this maximum is reported next to it as a diagnostic.
    """
    lo = _check_probability("e_lower", e_lower, upper=0.5)
    hi = _check_probability("e_upper", e_upper, upper=0.5)
    if lo > hi:
        raise DomainError(f"Error-rate interval is empty: [{lo!r}, {hi!r}]")
    if hi - lo <= 1e-15:
        return eve_information_rfi(hi, c_value, bound)

    grid = np.linspace(lo, hi, WORST_CASE_GRID)
    values = np.array([eve_information_rfi(float(e), c_value, bound) for e in grid])
    k = int(np.argmax(values))
    left = float(grid[max(k - 1, 0)])
    right = float(grid[min(k + 1, WORST_CASE_GRID - 1)])

    result = minimize_scalar(
        lambda e: -eve_information_rfi(float(e), c_value, bound),
        bounds=(left, right),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return max(float(values[k]), -float(result.fun))


def eve_information_mdi(e_xx_11_upper: float) -> float:
    """Eve's information for the original protocol: H(e_XX^{11,U})."""
    return binary_entropy(_check_probability("e_xx_11_upper", e_xx_11_upper, upper=0.5))


class ReportStatus(str, Enum):
    """Outcome of one key-rate evaluation."""

    OK = "ok"
    ZERO_YIELD = "zero_yield"
    INFEASIBLE = "infeasible"


class KeyRateReport(BaseModel):
    """Secret key rate with every intermediate bound used to produce it.

    Rates are secret bits per transmitted pulse pair.
    """

    variant: ProtocolVariant
    mode: EvaluationMode = EvaluationMode.ASYMPTOTIC
    status: ReportStatus = ReportStatus.OK

    rate: float = Field(ge=0.0, description="Clamped secret key rate")
    rate_unclamped: float = Field(description="Rate before clamping at zero")

    # Inputs of the rate formula
    mu_z: float
    q_zz: float
    e_zz: float
    s_zz_11_lower: float
    i_e: float
    f_ec: float
    p_zz: float = 1.0
    p_zz_mumu: float = 1.0

    # Information bound
    e_zz_11_upper: float | None = None
    e_zz_11_lower: float | None = None
    c_value: float | None = None
    c_simplified: float | None = None
    u: float | None = None
    v: float | None = None
    ie_bound: IEBound | None = None
    i_e_worst_case: float | None = None
    e_zz_clamped: bool = False

    # Decoy estimates per basis pair
    s11_lower: dict[str, float] = Field(default_factory=dict)
    s11_upper: dict[str, float] = Field(default_factory=dict)
    e11_lower: dict[str, float] = Field(default_factory=dict)
    e11_upper: dict[str, float] = Field(default_factory=dict)
    flipped: list[str] = Field(default_factory=list)
    failed_bases: list[str] = Field(default_factory=list)
    decoy_t1_asymmetry: float | None = None

    # Finite-size bookkeeping
    n_pairs: float | None = None
    epsilon: float | None = None
    n_bounds: int | None = None
    total_failure_probability: float | None = None
    bound_ends: dict[str, str] = Field(default_factory=dict)

    diagnostics: list[str] = Field(default_factory=list)
    protocol: dict[str, Any] = Field(default_factory=dict)
    channel: dict[str, Any] = Field(default_factory=dict)

    def recompute_rate(self) -> float:
        """Re-evaluate the unclamped rate from the audit fields."""
        return _rate_formula(
            self.q_zz,
            self.e_zz,
            self.s_zz_11_lower,
            self.i_e,
            self.mu_z,
            self.p_zz,
            self.p_zz_mumu,
            self.f_ec,
        )


def _rate_formula(
    q_zz: float,
    e_zz: float,
    s_zz_11_lower: float,
    i_e: float,
    mu_z: float,
    p_zz: float,
    p_zz_mumu: float,
    f_ec: float,
) -> float:
    single_photon = mu_z * mu_z * math.exp(-2.0 * mu_z) * s_zz_11_lower * (1.0 - i_e)
    leaked = q_zz * f_ec * binary_entropy(e_zz)
    return p_zz * p_zz_mumu * (single_photon - leaked)


def secret_key_rate(
    *,
    q_zz: float,
    e_zz: float,
    s_zz_11_lower: float,
    i_e: float,
    mu_z: float,
    p_zz: float = 1.0,
    p_zz_mumu: float = 1.0,
    f_ec: float = 1.16,
    variant: ProtocolVariant = ProtocolVariant.RFI,
) -> KeyRateReport:
    """R = P_zz P_zz^{mu mu} [mu^2 e^{-2mu} S_ZZ^{11,L} (1 - I_E) - Q_ZZ f H(E_ZZ)].

    The returned rate is clamped at 0.
    """
    for name, value in (
        ("q_zz", q_zz),
        ("e_zz", e_zz),
        ("s_zz_11_lower", s_zz_11_lower),
        ("i_e", i_e),
        ("p_zz", p_zz),
        ("p_zz_mumu", p_zz_mumu),
    ):
        _check_probability(name, value)
    if mu_z <= 0.0:
        raise DomainError(f"mu_z must be > 0, got {mu_z!r}")

    raw = _rate_formula(q_zz, e_zz, s_zz_11_lower, i_e, mu_z, p_zz, p_zz_mumu, f_ec)
    return KeyRateReport(
        variant=variant,
        rate=max(raw, 0.0),
        rate_unclamped=raw,
        mu_z=mu_z,
        q_zz=q_zz,
        e_zz=e_zz,
        s_zz_11_lower=s_zz_11_lower,
        i_e=i_e,
        f_ec=f_ec,
        p_zz=p_zz,
        p_zz_mumu=p_zz_mumu,
    )


def key_rate_from_estimates(
    estimates: SinglePhotonEstimates,
    *,
    q_zz: float,
    e_zz: float,
    protocol: ProtocolConfig,
    f_ec: float,
    mode: EvaluationMode = EvaluationMode.ASYMPTOTIC,
    prefactors: PrefactorMode | None = None,
) -> KeyRateReport:
    """Combine decoy estimates and the key-basis observables into a report.

    The RFI analysis evaluates I_E at e_ZZ^{11,U} with C taken from both ends
    of each error interval; the maximum of I_E over [e^L, e^U] and the
    upper-end-only C are recorded as diagnostics. The original analysis uses
    H(e_XX^{11,U}). An observed E_ZZ above 0.5 is capped for the entropy term
    and flagged on the report.
    """
    e_upper = min(0.5, estimates.e_zz_11_upper)
    e_lower = min(e_upper, estimates.e_zz_11_lower)
    extra: dict[str, Any] = {
        "e_zz_11_upper": estimates.e_zz_11_upper,
        "e_zz_11_lower": estimates.e_zz_11_lower,
    }
    diagnostics: list[str] = []

    if protocol.variant is ProtocolVariant.RFI:
        c_value = c_quantity_two_sided(estimates)
        at_upper = rfi_security_quantities(e_upper, c_value, protocol.ie_bound)
        i_e = at_upper.i_e
        worst = eve_information_worst_case(e_lower, e_upper, c_value, protocol.ie_bound)
        extra.update(
            c_value=c_value,
            c_simplified=c_quantity(estimates),
            u=at_upper.u,
            v=at_upper.v,
            ie_bound=protocol.ie_bound,
            i_e_worst_case=worst,
        )
        logger.debug("C=%.6f, I_E=%.6f, I_E(worst over interval)=%.6f", c_value, i_e, worst)
    else:
        i_e = eve_information_mdi(min(0.5, _required_upper(estimates, BasisPair.XX)))

    if e_zz > 0.5:
        logger.warning("Observed E_ZZ=%.6f exceeds 0.5; capped for error correction", e_zz)
        diagnostics.append(f"E_ZZ {e_zz:.6g} capped at 0.5")
        extra["e_zz_clamped"] = True

    p_zz, p_zz_mumu = protocol.key_prefactors(prefactors)
    report = secret_key_rate(
        q_zz=q_zz,
        e_zz=min(0.5, e_zz),
        s_zz_11_lower=estimates.s_zz_11_lower,
        i_e=i_e,
        mu_z=protocol.mu_z,
        p_zz=p_zz,
        p_zz_mumu=p_zz_mumu,
        f_ec=f_ec,
        variant=protocol.variant,
    )
    extra.update(
        mode=mode,
        s11_lower={b.value: v for b, v in estimates.s11_lower.items()},
        s11_upper={b.value: v for b, v in estimates.s11_upper.items()},
        e11_lower={b.value: v for b, v in estimates.e11_lower.items()},
        e11_upper={b.value: v for b, v in estimates.e11_upper.items()},
        flipped=sorted(b.value for b in estimates.flipped),
        failed_bases=sorted(b.value for b in estimates.failed),
        decoy_t1_asymmetry=estimates.t1_asymmetry,
        diagnostics=diagnostics,
        protocol=protocol.model_dump(mode="json"),
    )
    return report.model_copy(update=extra)
