"""End-to-end key rate evaluation from the channel model."""

import pytest

from mdi_keyrate.finitekey import FiniteKeyConfig
from mdi_keyrate.keyrate import evaluate, evaluate_asymptotic, evaluate_finite
from mdi_keyrate.model.channel import ChannelParams
from mdi_keyrate.optimizer import optimize_parameters
from mdi_keyrate.protocol import EvaluationMode, ProtocolConfig, ProtocolVariant
from mdi_keyrate.scan.runconfig import RunConfig
from mdi_keyrate.security import ReportStatus, binary_entropy
from tests.conftest import make_biased_protocol, make_protocol

# Frame misalignment sweep used for the stability checks
BETA_GRID = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0]


def dead_channel() -> ChannelParams:
    """Detectors that never click."""
    return ChannelParams(eta_d=0.0, p_d=0.0, dist_a=10.0, dist_b=10.0)


class TestAsymptoticRate:
    """Tests for the infinite-data pipeline."""

    def test_reference_point_80km(
        self, symmetric_protocol: ProtocolConfig, channel_80km: ChannelParams
    ) -> None:
        """Symmetric scheme at 80 km per arm, mu = 0.67, nu = 0.01, beta = 0."""
        report = evaluate_asymptotic(symmetric_protocol, channel_80km)
        assert report.status == ReportStatus.OK
        assert report.rate == pytest.approx(3.980e-7, rel=1e-2)
        assert report.i_e == pytest.approx(0.1437, abs=1e-3)
        assert report.c_value == pytest.approx(1.905, abs=1e-3)
        assert report.e_zz_11_lower == pytest.approx(0.00613, abs=5e-5)
        assert report.e_zz_11_upper == pytest.approx(0.00664, abs=5e-5)
        assert report.recompute_rate() == pytest.approx(report.rate_unclamped, rel=1e-12)

    def test_interval_maximum_is_a_diagnostic(
        self, symmetric_protocol: ProtocolConfig, channel_80km: ChannelParams
    ) -> None:
        """The worst I_E over [e^L, e^U] is reported next to the rate's I_E, not used by it."""
        report = evaluate_asymptotic(symmetric_protocol, channel_80km)
        assert report.i_e_worst_case == pytest.approx(0.1451, abs=1e-3)
        assert report.i_e_worst_case >= report.i_e
        assert report.c_simplified == pytest.approx(report.c_value, abs=1e-12)

    @pytest.mark.parametrize(
        ("mu", "nu", "max_spread"),
        [(0.70, 0.001, 0.05), (0.67, 0.01, 0.30)],
        ids=["weak-decoy", "reference-decoy"],
    )
    def test_fixed_intensities_under_misalignment(
        self, channel_80km: ChannelParams, mu: float, nu: float, max_spread: float
    ) -> None:
        """At fixed intensities the spread over beta grows with the decoy intensity."""
        rates = [
            evaluate_asymptotic(make_protocol(mu_z=mu, mu_x=mu, nu_x=nu, beta_deg=b), channel_80km)
            .rate
            for b in BETA_GRID
        ]
        assert min(rates) > 0.0
        assert (max(rates) - min(rates)) / max(rates) < max_spread

    def test_optimized_rate_stable_under_misalignment(self, channel_80km: ChannelParams) -> None:
        """With intensities optimized per beta the rate and the optimal mu barely move."""
        results = [
            optimize_parameters(make_protocol(beta_deg=b), channel_80km, n_starts=2, max_workers=1)
            for b in (0.0, 15.0, 25.0, 45.0)
        ]
        rates = [result.best_rate for result in results]
        intensities = [result.best.mu_z for result in results]
        assert min(rates) == pytest.approx(4.59e-7, rel=0.02)
        assert (max(rates) - min(rates)) / max(rates) < 0.05
        assert max(intensities) - min(intensities) < 0.05
        assert all(result.best.nu_x < 1e-3 for result in results)

    @pytest.mark.parametrize("beta", [10.0, 20.0, 35.0])
    def test_mirror_symmetry_in_beta(self, channel_80km: ChannelParams, beta: float) -> None:
        """beta and 90 - beta give the same rate."""
        rate = evaluate_asymptotic(make_protocol(beta_deg=beta), channel_80km).rate
        mirror = evaluate_asymptotic(make_protocol(beta_deg=90.0 - beta), channel_80km).rate
        assert mirror == pytest.approx(rate, rel=1e-6)

    def test_rfi_beats_original_when_misaligned(self, channel_80km: ChannelParams) -> None:
        """At beta = 25 degrees and mu = 0.67 the RFI rate is over ten times the original one."""
        rfi = evaluate_asymptotic(make_protocol(beta_deg=25.0), channel_80km)
        original = evaluate_asymptotic(
            make_protocol(variant=ProtocolVariant.ORIGINAL, beta_deg=25.0), channel_80km
        )
        assert rfi.rate == pytest.approx(3.035e-7, rel=1e-2)
        assert original.rate > 0.0
        assert rfi.rate / original.rate >= 10.0

    def test_original_loses_key_first(self) -> None:
        """At 100 km per arm and beta = 25 degrees only the RFI analysis keeps a key."""
        channel = ChannelParams.symmetric(100.0)
        rfi = evaluate_asymptotic(make_protocol(beta_deg=25.0), channel)
        original = evaluate_asymptotic(
            make_protocol(variant=ProtocolVariant.ORIGINAL, beta_deg=25.0), channel
        )
        assert rfi.rate == pytest.approx(3.856e-8, rel=2e-2)
        assert original.rate == 0.0
        assert original.rate_unclamped < 0.0

    def test_original_uses_xx_entropy(self, channel_80km: ChannelParams) -> None:
        """I_E = H(e_XX^{11,U}) without any C."""
        report = evaluate_asymptotic(
            make_protocol(variant=ProtocolVariant.ORIGINAL), channel_80km
        )
        assert report.c_value is None
        assert report.i_e == pytest.approx(binary_entropy(min(0.5, report.e11_upper["XX"])))

    @pytest.mark.parametrize("beta", [0.0, 25.0, 45.0])
    @pytest.mark.parametrize("distance", [0.0, 50.0, 120.0])
    def test_model_c_never_exceeds_two(self, distance: float, beta: float) -> None:
        """Model data carry at most the correlation of a perfect single-photon source."""
        channel = ChannelParams.symmetric(distance)
        report = evaluate_asymptotic(make_protocol(beta_deg=beta), channel)
        assert report.c_value is not None
        assert report.c_value <= 2.0 + 1e-6

    def test_dead_detectors_report_zero_yield(self, symmetric_protocol: ProtocolConfig) -> None:
        """No clicks at all give a zero-rate report instead of an error."""
        report = evaluate_asymptotic(symmetric_protocol, dead_channel())
        assert report.status == ReportStatus.ZERO_YIELD
        assert report.rate == 0.0
        assert report.diagnostics


class TestFiniteEvaluation:
    """Tests for model-synthesized finite-size runs."""

    def test_dead_detectors_report_zero_yield(self, finite_config: FiniteKeyConfig) -> None:
        """Zero yields carry N and epsilon into the report."""
        report = evaluate_finite(make_biased_protocol(), dead_channel(), finite_config)
        assert report.status == ReportStatus.ZERO_YIELD
        assert report.n_pairs == 3e12
        assert report.epsilon == 1e-10

    def test_dispatch_on_mode(self, channel_40km: ChannelParams) -> None:
        """evaluate follows the run configuration's mode."""
        config = RunConfig(
            channel=channel_40km, protocol=make_biased_protocol(), mode=EvaluationMode.FINITE
        )
        report = evaluate(config)
        assert report.mode == EvaluationMode.FINITE
        assert report.rate == pytest.approx(2.086e-7, rel=0.05)
        assert evaluate(config.model_copy(update={"mode": EvaluationMode.ASYMPTOTIC})).rate > (
            report.rate
        )
