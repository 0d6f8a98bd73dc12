"""Derivative-free maximization of the key rate over intensities and probabilities.

Each start runs a coordinate (compass) search: every free coordinate is moved
by +/- its step, all candidates are evaluated against a snapshot of the current
point, the best strict improvement is accepted and steps shrink when a sweep
stops paying off. Starts come from a scrambled Halton sequence plus the
configured vector.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from pydantic import ValidationError
from scipy.stats import qmc

from mdi_keyrate.errors import ConfigurationError, KeyRateError
from mdi_keyrate.finitekey import FiniteKeyConfig
from mdi_keyrate.keyrate import evaluate_asymptotic, evaluate_finite, zero_rate_report
from mdi_keyrate.model.channel import ChannelParams
from mdi_keyrate.protocol import EvaluationMode, PrefactorMode, ProtocolConfig, SamplingScheme
from mdi_keyrate.security import KeyRateReport, ReportStatus

logger = logging.getLogger(__name__)

PARAMETER_NAMES = ("mu_z", "mu_x", "nu_x", "p_z", "p_x", "p_x_signal")
PROBABILITY_NAMES = ("p_z", "p_x", "p_x_signal")

DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "mu_z": (0.01, 1.5),
    "mu_x": (0.01, 1.5),
    "nu_x": (1e-4, 0.5),
    "p_z": (0.01, 0.95),
    "p_x": (0.01, 0.45),
    "p_x_signal": (0.01, 0.99),
}

INITIAL_STEP = 0.25  # fraction of each coordinate's range
STEP_SHRINK = 0.5
NO_KEY = float("-inf")


@dataclass(frozen=True)
class ParameterVector:
    """Point in the optimization space."""

    mu_z: float
    mu_x: float
    nu_x: float
    p_z: float
    p_x: float
    p_x_signal: float

    @classmethod
    def from_protocol(cls, protocol: ProtocolConfig) -> ParameterVector:
        return cls(**{name: getattr(protocol, name) for name in PARAMETER_NAMES})

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def with_values(self, values: Mapping[str, float]) -> ParameterVector:
        return replace(self, **values)

    def apply(self, protocol: ProtocolConfig) -> ProtocolConfig:
        """Return a validated protocol carrying these parameters.

        The symmetric scheme has a single signal intensity, so ``mu_x`` follows ``mu_z``.

        Raises:
            pydantic.ValidationError: If the combination is infeasible.
        """
        values = self.as_dict()
        if protocol.scheme is SamplingScheme.SYMMETRIC:
            values["mu_x"] = values["mu_z"]
        return ProtocolConfig.model_validate({**protocol.model_dump(), **values})


@dataclass(frozen=True)
class TraceStep:
    """One accepted improvement."""

    start: int
    evaluation: int
    rate: float
    vector: ParameterVector


@dataclass
class OptimizationResult:
    """Best point found over all starts."""

    best: ParameterVector
    best_rate: float
    evaluations: int
    converged: bool
    zero_rate: bool
    report: KeyRateReport
    start_rates: list[float] = field(default_factory=list)
    trace: list[TraceStep] = field(default_factory=list)


def resolve_bounds(
    overrides: Mapping[str, tuple[float, float]] | None = None,
) -> dict[str, tuple[float, float]]:
    """Merge bound overrides into the defaults; equal ends pin a parameter.

    Raises:
        ConfigurationError: On unknown names or inverted bounds.
    """
    bounds = dict(DEFAULT_BOUNDS)
    for name, (low, high) in (overrides or {}).items():
        if name not in DEFAULT_BOUNDS:
            raise ConfigurationError(f"Unknown optimization parameter '{name}'", key=name)
        if low > high:
            raise ConfigurationError(f"Lower bound exceeds upper bound for '{name}'", key=name)
        bounds[name] = (float(low), float(high))
    return bounds


def free_parameters(
    protocol: ProtocolConfig, bounds: Mapping[str, tuple[float, float]], finite: bool
) -> list[str]:
    """Coordinates the search moves.

    Pinned coordinates are fixed; ``mu_x`` is tied to ``mu_z`` in the symmetric
    scheme, and probabilities only matter when they enter the rate.
    """
    names = []
    for name in PARAMETER_NAMES:
        low, high = bounds[name]
        if low == high:
            continue
        if name == "mu_x" and protocol.scheme is SamplingScheme.SYMMETRIC:
            continue
        uses_sampling = finite or protocol.prefactors is PrefactorMode.SAMPLING
        if name in PROBABILITY_NAMES and not uses_sampling:
            continue
        names.append(name)
    return names


class _Objective:
    """Unclamped key rate of a parameter vector.

    Negative rates are kept so the search can climb out of regions without
    key; infeasible vectors and points without a yield bound score -inf.
    """

    def __init__(
        self,
        protocol: ProtocolConfig,
        channel: ChannelParams,
        finite: FiniteKeyConfig | None,
    ) -> None:
        self.protocol = protocol
        self.channel = channel
        self.finite = finite

    def report(self, vector: ParameterVector) -> KeyRateReport:
        config = vector.apply(self.protocol)
        if self.finite is not None:
            return evaluate_finite(config, self.channel, self.finite)
        return evaluate_asymptotic(config, self.channel)

    def __call__(self, vector: ParameterVector) -> float:
        try:
            report = self.report(vector)
        except ValidationError:
            return NO_KEY
        except KeyRateError as e:
            logger.debug("Objective failed at %s: %s", vector, e)
            return NO_KEY
        if report.status is not ReportStatus.OK:
            return NO_KEY
        return report.rate_unclamped

    def final_report(self, vector: ParameterVector) -> KeyRateReport:
        """Report of the returned vector; an infeasible one gets a zero-rate report."""
        try:
            return self.report(vector)
        except ValidationError as e:
            logger.warning("Best vector is infeasible: %s", vector)
            mode = EvaluationMode.ASYMPTOTIC if self.finite is None else EvaluationMode.FINITE
            return zero_rate_report(
                self.protocol,
                self.channel,
                mode,
                f"Infeasible parameters {vector.as_dict()}: {e.error_count()} validation error(s)",
                status=ReportStatus.INFEASIBLE,
            )


def _clip(value: float, low: float, high: float) -> float:
    return min(max(value, low), high)


def optimize_parameters(
    protocol: ProtocolConfig,
    channel: ChannelParams,
    finite: FiniteKeyConfig | None = None,
    *,
    bounds: Mapping[str, tuple[float, float]] | None = None,
    seed: int = 7,
    n_starts: int = 8,
    max_workers: int = 4,
    rel_tol: float = 1e-3,
    step_tol: float = 1e-3,
    max_evaluations: int = 20_000,
) -> OptimizationResult:
    """Maximize the asymptotic (``finite`` is None) or finite-size key rate.

    Args:
        protocol: Protocol whose parameters seed the configured start.
        channel: Channel parameters, held fixed.
        finite: Finite-size settings; None optimizes the asymptotic rate.
        bounds: Per-parameter (low, high) overrides; equal ends pin a parameter.
        seed: Seed of the scrambled Halton starts.
        n_starts: Number of quasi-random starts besides the configured vector.
        max_workers: Threads evaluating the candidates of one sweep.
        rel_tol: Relative improvement below which a sweep counts as stalled.
        step_tol: Step size, as a fraction of each range, at which a start converges.
        max_evaluations: Hard cap on objective evaluations across all starts.

    The search compares unclamped rates, so starts without key still move
    towards the region where the rate turns positive.

    Returns:
        OptimizationResult whose ``best_rate`` equals a fresh evaluation of ``best``;
        ``zero_rate`` is set when that rate is 0, including an infeasible ``best``.
    """
    resolved = resolve_bounds(bounds)
    score = _Objective(protocol, channel, finite)
    names = free_parameters(protocol, resolved, finite is not None)

    pinned = {name: low for name, (low, high) in resolved.items() if low == high}
    origin = ParameterVector.from_protocol(protocol).with_values(pinned)
    origin = origin.with_values(
        {name: _clip(getattr(origin, name), *resolved[name]) for name in names}
    )

    starts = [origin]
    if names:
        lows = np.array([resolved[n][0] for n in names])
        highs = np.array([resolved[n][1] for n in names])
        sampler = qmc.Halton(d=len(names), scramble=True, seed=seed)
        points = qmc.scale(sampler.random(n_starts), lows, highs)
        starts.extend(
            origin.with_values({n: float(v) for n, v in zip(names, row, strict=True)})
            for row in points
        )

    evaluations = 0
    trace: list[TraceStep] = []
    start_rates: list[float] = []
    best_vector, best_rate = origin, NO_KEY
    all_converged = True

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        for index, start in enumerate(starts):
            current = start
            current_rate = score(current)
            evaluations += 1
            start_rates.append(max(current_rate, 0.0))
            steps = {n: INITIAL_STEP * (resolved[n][1] - resolved[n][0]) for n in names}
            converged = not names

            while names and evaluations < max_evaluations:
                candidates = []
                for name in names:
                    low, high = resolved[name]
                    value = getattr(current, name)
                    for delta in (steps[name], -steps[name]):
                        moved = _clip(value + delta, low, high)
                        if moved != value:
                            candidates.append(current.with_values({name: moved}))

                rates = list(pool.map(score, candidates))
                evaluations += len(candidates)

                best_index = int(np.argmax(rates)) if rates else -1
                if best_index >= 0 and rates[best_index] > current_rate:
                    gain = (
                        (rates[best_index] - current_rate) / abs(current_rate)
                        if math.isfinite(current_rate) and current_rate != 0.0
                        else float("inf")
                    )
                    current, current_rate = candidates[best_index], rates[best_index]
                    trace.append(TraceStep(index, evaluations, max(current_rate, 0.0), current))
                    if gain < rel_tol:
                        steps = {n: s * STEP_SHRINK for n, s in steps.items()}
                else:
                    steps = {n: s * STEP_SHRINK for n, s in steps.items()}

                if all(steps[n] < step_tol * (resolved[n][1] - resolved[n][0]) for n in names):
                    converged = True
                    break

            all_converged = all_converged and converged
            logger.debug("Start %d finished at rate %.4e", index, current_rate)
            if current_rate > best_rate:
                best_vector, best_rate = current, current_rate

    report = score.final_report(best_vector)
    final_rate = report.rate
    zero = final_rate <= 0.0

    if zero:
        logger.info("Optimizer found no positive rate over %d starts", len(starts))
    else:
        logger.info(
            "Optimizer converged=%s rate=%.4e after %d evaluations",
            all_converged,
            final_rate,
            evaluations,
        )

    return OptimizationResult(
        best=best_vector,
        best_rate=final_rate,
        evaluations=evaluations,
        converged=all_converged,
        zero_rate=zero,
        report=report,
        start_rates=start_rates,
        trace=trace,
    )
