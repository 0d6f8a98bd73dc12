"""End-to-end key-rate evaluation: channel model to report."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

from mdi_keyrate.decoy import estimate_all_bases
from mdi_keyrate.errors import EstimationError
from mdi_keyrate.finitekey import FiniteKeyConfig, finite_key_rate, synthesize_counts
from mdi_keyrate.model.channel import ChannelParams
from mdi_keyrate.model.observables import BasisPair, observable_table
from mdi_keyrate.protocol import EvaluationMode, PrefactorMode, ProtocolConfig
from mdi_keyrate.security import KeyRateReport, ReportStatus, key_rate_from_estimates

if TYPE_CHECKING:
    from mdi_keyrate.scan.runconfig import RunConfig

logger = logging.getLogger(__name__)


def zero_rate_report(
    protocol: ProtocolConfig,
    channel: ChannelParams,
    mode: EvaluationMode,
    reason: str,
    status: ReportStatus = ReportStatus.ZERO_YIELD,
) -> KeyRateReport:
    """Zero-rate report for a point with no usable key.

    ``zero_yield``: a required single-photon yield bound is zero.
    ``infeasible``: the parameters do not form a valid protocol.
    """
    sampling = PrefactorMode.SAMPLING if mode is EvaluationMode.FINITE else None
    p_zz, p_zz_mumu = protocol.key_prefactors(sampling)
    return KeyRateReport(
        variant=protocol.variant,
        mode=mode,
        status=status,
        rate=0.0,
        rate_unclamped=0.0,
        mu_z=protocol.mu_z,
        q_zz=0.0,
        e_zz=0.0,
        s_zz_11_lower=0.0,
        i_e=1.0,
        f_ec=channel.f_ec,
        p_zz=p_zz,
        p_zz_mumu=p_zz_mumu,
        diagnostics=[reason],
        protocol=protocol.model_dump(mode="json"),
        channel=channel.model_dump(mode="json"),
    )


def evaluate_asymptotic(protocol: ProtocolConfig, channel: ChannelParams) -> KeyRateReport:
    """Infinite-data key rate: model table, decoy bounds, security bound."""
    table = observable_table(protocol, channel)
    settings = protocol.intensity_settings()
    try:
        estimates = estimate_all_bases(table, settings, protocol.variant, t1_form=protocol.decoy_t1)
    except EstimationError as e:
        if not e.zero_yield:
            raise
        logger.debug("Zero yield at %.3g km: %s", channel.total_distance, e)
        return zero_rate_report(protocol, channel, EvaluationMode.ASYMPTOTIC, str(e))

    signal = settings.signal_label(BasisPair.ZZ)
    record = table.get(BasisPair.ZZ, signal, signal)
    report = key_rate_from_estimates(
        estimates,
        q_zz=record.q,
        e_zz=record.e or 0.0,
        protocol=protocol,
        f_ec=channel.f_ec,
    )
    return report.model_copy(update={"channel": channel.model_dump(mode="json")})


def evaluate_finite(
    protocol: ProtocolConfig, channel: ChannelParams, finite: FiniteKeyConfig
) -> KeyRateReport:
    """Finite-size key rate on counts synthesized from the channel model."""
    counts = synthesize_counts(protocol, channel, finite.n_pairs)
    try:
        return finite_key_rate(counts, finite, protocol, channel)
    except EstimationError as e:
        if not e.zero_yield:
            raise
        logger.debug("Zero yield at %.3g km (finite): %s", channel.total_distance, e)
        report = zero_rate_report(protocol, channel, EvaluationMode.FINITE, str(e))
        return report.model_copy(update={"n_pairs": finite.n_pairs, "epsilon": finite.epsilon})


def evaluate(config: RunConfig) -> KeyRateReport:
    """Dispatch a resolved run configuration on its mode."""
    if config.mode is EvaluationMode.FINITE:
        return evaluate_finite(config.protocol, config.channel, config.finite)
    return evaluate_asymptotic(config.protocol, config.channel)
