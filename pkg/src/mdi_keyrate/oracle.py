"""Independent brute-force validators for the model, decoy and finite-key code.

None of these share numerics with the code they check: I0 comes from the
integral identity, decoy fixtures from explicit photon-number mixtures and
interval coverage from direct binomial sampling.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.stats import poisson

from mdi_keyrate.errors import DomainError
from mdi_keyrate.model.observables import BasisPair, CellKey, GainErrorRecord, ObservableTable
from mdi_keyrate.protocol import IntensitySettings

QUADRATURE_NODES = 4096
MAX_PHOTONS = 20
TAIL_TOL = 1e-12
MIN_TRIALS = 10_000


def i0_by_quadrature(z: float) -> float:
    """I0(z) = (1/2pi) * integral of exp(z cos phi) over a period, by the trapezoid rule.

    The rule is spectrally accurate for periodic integrands. The argument's
    absolute value is used, so the result is even by construction.
    """
    phi = 2.0 * np.pi * np.arange(QUADRATURE_NODES) / QUADRATURE_NODES
    return float(np.mean(np.exp(abs(z) * np.cos(phi))))


@dataclass(frozen=True)
class YieldGrid:
    """Yields Y_nm and error rates e_nm for photon numbers n, m <= 20."""

    yields: NDArray[np.float64]
    error_rates: NDArray[np.float64]

    def __post_init__(self) -> None:
        shape = (MAX_PHOTONS + 1, MAX_PHOTONS + 1)
        for name in ("yields", "error_rates"):
            values = getattr(self, name)
            if values.shape != shape:
                raise DomainError(f"{name} must have shape {shape}, got {values.shape}")
            if np.any(values < 0.0) or np.any(values > 1.0):
                raise DomainError(f"{name} must lie in [0, 1]")

    @classmethod
    def constant(cls, yield_value: float, error_rate: float = 0.0) -> YieldGrid:
        shape = (MAX_PHOTONS + 1, MAX_PHOTONS + 1)
        return cls(np.full(shape, yield_value), np.full(shape, error_rate))

    @classmethod
    def random(cls, rng: np.random.Generator) -> YieldGrid:
        """Smooth channel-like yields with random loss, dark counts and noise."""
        n = np.arange(MAX_PHOTONS + 1)
        eta_a, eta_b = rng.uniform(1e-4, 0.5, size=2)
        dark = rng.uniform(0.0, 1e-3)
        survive = np.outer((1.0 - eta_a) ** n, (1.0 - eta_b) ** n)
        yields = (1.0 - (1.0 - dark) * survive) * rng.uniform(0.2, 1.0)
        yields *= rng.uniform(0.8, 1.0, size=yields.shape)
        errors = np.clip(
            rng.uniform(0.0, 0.5) + rng.normal(0.0, 0.05, size=yields.shape), 0.0, 1.0
        )
        return cls(np.clip(yields, 0.0, 1.0), errors)

    @property
    def y11(self) -> float:
        return float(self.yields[1, 1])

    @property
    def error_gain_11(self) -> float:
        """e_11 * Y_11."""
        return float(self.yields[1, 1] * self.error_rates[1, 1])


def _photon_weights(lambda_a: float, lambda_b: float) -> NDArray[np.float64]:
    """Poisson(n; lambda_a) * Poisson(m; lambda_b), truncated at n + m <= 20."""
    n = np.arange(MAX_PHOTONS + 1)
    weights = np.outer(poisson.pmf(n, lambda_a), poisson.pmf(n, lambda_b))
    weights[np.add.outer(n, n) > MAX_PHOTONS] = 0.0
    tail = 1.0 - float(weights.sum())
    if tail > TAIL_TOL:
        raise DomainError(
            f"Truncated photon-number mass misses {tail:.3e} at intensities "
            f"({lambda_a:g}, {lambda_b:g})"
        )
    return weights


def synthetic_decoy_fixture(grid: YieldGrid, settings: IntensitySettings) -> ObservableTable:
    """Table with Q = sum P(n)P(m) Y_nm and EQ = sum P(n)P(m) e_nm Y_nm for every cell.

    Raises:
        DomainError: If the truncation tail exceeds 1e-12 of the total mass.
    """
    records: dict[CellKey, GainErrorRecord] = {}
    error_yields = grid.yields * grid.error_rates
    for basis in BasisPair:
        labels = settings.labels_for(basis)
        for label_a in labels:
            for label_b in labels:
                weights = _photon_weights(settings.intensity(label_a), settings.intensity(label_b))
                q = float(np.sum(weights * grid.yields))
                eq = float(np.sum(weights * error_yields))
                records[(basis, label_a, label_b)] = GainErrorRecord.clamped(q, eq)
    return ObservableTable(records)


IntervalOp = Callable[[int, int, float], tuple[float, float]]


def coverage_check(
    interval: IntervalOp,
    trials: int,
    epsilon: float,
    *,
    n: int = 10_000,
    p: float = 0.01,
    seed: int = 0,
) -> float:
    """Fraction of binomial samples whose interval misses the true rate ``p``.

    ``interval(k, n, epsilon)`` must return (lower, upper) rate bounds.

    Raises:
        DomainError: If fewer than 10^4 trials are requested.
    """
    if trials < MIN_TRIALS:
        raise DomainError(f"Coverage needs at least {MIN_TRIALS} trials, got {trials}")
    rng = np.random.default_rng(seed)
    samples = rng.binomial(n, p, size=trials)

    # One interval per distinct count
    misses = 0
    values, counts = np.unique(samples, return_counts=True)
    for k, count in zip(values, counts, strict=True):
        lower, upper = interval(int(k), n, epsilon)
        if not (lower <= p <= upper):
            misses += int(count)
    return misses / trials
