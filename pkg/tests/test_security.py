"""Tests for entropy, C, Eve's information and the key rate formula."""

import logging
import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from mdi_keyrate.errors import DomainError, EstimationError
from mdi_keyrate.model.observables import BasisPair
from mdi_keyrate.protocol import IEBound
from mdi_keyrate.security import (
    SinglePhotonEstimates,
    binary_entropy,
    c_quantity,
    c_quantity_two_sided,
    eve_information_mdi,
    eve_information_rfi,
    eve_information_worst_case,
    key_rate_from_estimates,
    rfi_security_quantities,
    secret_key_rate,
)
from tests.conftest import make_protocol

probabilities = st.floats(min_value=0.0, max_value=1.0)


def make_estimates(
    xx: float, yy: float, xy: float, yx: float, *, lower: tuple[float, ...] | None = None
) -> SinglePhotonEstimates:
    """Estimates carrying only the four correlation-pair upper bounds (and optional lowers)."""
    bases = (BasisPair.XX, BasisPair.YY, BasisPair.XY, BasisPair.YX)
    e11_lower = dict(zip(bases, lower, strict=True)) if lower else {}
    return SinglePhotonEstimates(
        s_zz_11_lower=1e-6,
        e_zz_11_upper=0.004,
        e11_lower=e11_lower,
        e11_upper=dict(zip(bases, (xx, yy, xy, yx), strict=True)),
    )


class TestBinaryEntropy:
    """Tests for H(x)."""

    @pytest.mark.parametrize(
        ("x", "expected"),
        [(0.0, 0.0), (1.0, 0.0), (0.5, 1.0), (0.11, 0.499916), (0.052, 0.294833)],
    )
    def test_values(self, x: float, expected: float) -> None:
        """Reference values, with H(0) = H(1) = 0 by continuity."""
        assert binary_entropy(x) == pytest.approx(expected, abs=1e-6)

    @given(probabilities)
    def test_symmetric_and_bounded(self, x: float) -> None:
        """H(x) = H(1 - x) <= H(0.5)."""
        assert binary_entropy(x) == pytest.approx(binary_entropy(1.0 - x), abs=1e-12)
        assert binary_entropy(x) <= 1.0 + 1e-15

    @pytest.mark.parametrize("x", [-0.01, 1.01, math.nan])
    def test_out_of_range_rejected(self, x: float) -> None:
        """Arguments outside [0, 1] are domain errors."""
        with pytest.raises(DomainError):
            binary_entropy(x)


class TestCQuantity:
    """Tests for the correlation quantity C."""

    @pytest.mark.parametrize(
        ("errors", "expected", "tolerance"),
        [
            ((0.0, 0.0, 0.5, 0.5), 2.0, 1e-12),
            ((0.052, 0.035, 0.534, 0.527), 1.668, 1e-3),
            ((0.174, 0.225, 0.176, 0.166), 1.594, 2e-3),
            ((0.262, 0.212, 0.683, 0.631), 0.558352, 1e-6),
            ((0.348, 0.350, 0.319, 0.316), 0.449, 1e-2),
        ],
        ids=["error-free", "aligned", "beta-25", "finite-aligned", "finite-beta-25"],
    )
    def test_values(self, errors: tuple[float, ...], expected: float, tolerance: float) -> None:
        """C = sum of (1 - 2 min(0.5, e))^2."""
        assert c_quantity(make_estimates(*errors)) == pytest.approx(expected, abs=tolerance)

    def test_missing_bound_is_estimation_error(self) -> None:
        """All four correlation pairs are required."""
        estimates = SinglePhotonEstimates(
            s_zz_11_lower=1e-6, e_zz_11_upper=0.004, e11_upper={BasisPair.XX: 0.05}
        )
        with pytest.raises(EstimationError) as exc_info:
            c_quantity(estimates)
        assert exc_info.value.basis == "XY"

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=8, max_size=8))
    def test_two_sided_invariant_under_mirroring(self, values: list[float]) -> None:
        """Replacing [lo, hi] by [1 - hi, 1 - lo] leaves the two-sided C unchanged."""
        pairs = [sorted(values[i : i + 2]) for i in range(0, 8, 2)]
        lowers = tuple(p[0] for p in pairs)
        uppers = tuple(p[1] for p in pairs)
        mirrored_lowers = (1.0 - uppers[0], *lowers[1:])
        mirrored_uppers = (1.0 - lowers[0], *uppers[1:])
        original = c_quantity_two_sided(make_estimates(*uppers, lower=lowers))
        mirrored = c_quantity_two_sided(make_estimates(*mirrored_uppers, lower=mirrored_lowers))
        assert mirrored == pytest.approx(original, abs=1e-12)

    def test_two_sided_never_exceeds_simplified(self) -> None:
        """Using both interval ends can only lower C."""
        estimates = make_estimates(0.1, 0.2, 0.45, 0.3, lower=(0.05, 0.1, 0.4, 0.2))
        assert c_quantity_two_sided(estimates) <= c_quantity(estimates) + 1e-15


class TestEveInformationRfi:
    """Tests for the reference-frame-independent information bound."""

    @pytest.mark.parametrize(("e", "c", "expected"), [(0.0, 2.0, 0.0), (0.5, 0.0, 1.0)])
    def test_limits(self, e: float, c: float, expected: float) -> None:
        """No-error and no-correlation limits."""
        for bound in IEBound:
            assert eve_information_rfi(e, c, bound) == pytest.approx(expected, abs=1e-12)

    def test_printed_convention(self) -> None:
        """u = C/2/(1-e), with v clamped to 1."""
        quantities = rfi_security_quantities(0.02, 0.56, IEBound.PRINTED)
        assert quantities.i_e == pytest.approx(0.9215, abs=1e-3)
        assert 0.0 <= quantities.v <= 1.0

    @pytest.mark.parametrize(
        ("e", "c", "expected"),
        [(0.004, 1.668, 0.254), (0.005, 1.595, 0.297), (0.02, 0.56, 0.78), (0.015, 0.44, 0.83)],
    )
    def test_root_convention_matches_reported_values(
        self, e: float, c: float, expected: float
    ) -> None:
        """u = sqrt(C/2)/(1-e) reproduces the published I_E values."""
        assert eve_information_rfi(e, c, IEBound.ROOT) == pytest.approx(expected, abs=5e-3)

    @given(
        e=st.one_of(st.just(0.0), st.floats(min_value=1e-3, max_value=0.5)),
        c_low=st.floats(min_value=0.0, max_value=4.0),
        c_high=st.floats(min_value=0.0, max_value=4.0),
    )
    def test_root_non_increasing_in_c(self, e: float, c_low: float, c_high: float) -> None:
        """More correlation never gives Eve more information."""
        assume(c_low <= c_high)
        high = eve_information_rfi(e, c_high, IEBound.ROOT)
        low = eve_information_rfi(e, c_low, IEBound.ROOT)
        assert high <= low + 1e-9

    @pytest.mark.parametrize(("e", "c"), [(0.51, 1.0), (-0.01, 1.0), (0.1, -0.1), (0.1, 4.1)])
    def test_out_of_range_rejected(self, e: float, c: float) -> None:
        """e in [0, 0.5], C in [0, 4]."""
        with pytest.raises(DomainError):
            eve_information_rfi(e, c)

    def test_worst_case_dominates_endpoints(self) -> None:
        """The interval maximum is at least the value at either end."""
        worst = eve_information_worst_case(0.00613, 0.00664, 1.905)
        assert worst >= eve_information_rfi(0.00664, 1.905) - 1e-15
        assert worst >= eve_information_rfi(0.00613, 1.905) - 1e-15

    def test_worst_case_degenerate_interval(self) -> None:
        """A point interval evaluates the bound once."""
        assert eve_information_worst_case(0.01, 0.01, 1.5) == eve_information_rfi(0.01, 1.5)

    def test_worst_case_empty_interval_rejected(self) -> None:
        """lower > upper is a domain error."""
        with pytest.raises(DomainError):
            eve_information_worst_case(0.2, 0.1, 1.0)


class TestEveInformationMdi:
    """Tests for the original protocol's bound."""

    @pytest.mark.parametrize(("e", "expected"), [(0.0, 0.0), (0.5, 1.0), (0.052, 0.294833)])
    def test_values(self, e: float, expected: float) -> None:
        """I_E = H(e_XX)."""
        assert eve_information_mdi(e) == pytest.approx(expected, abs=1e-6)

    def test_above_half_rejected(self) -> None:
        """Flips keep e_XX at or below 0.5."""
        with pytest.raises(DomainError):
            eve_information_mdi(0.6)


class TestSecretKeyRate:
    """Tests for the rate formula."""

    def test_full_information_clamps_to_zero(self) -> None:
        """I_E = 1 with E_ZZ > 0 leaves only the leak."""
        report = secret_key_rate(q_zz=1e-5, e_zz=0.01, s_zz_11_lower=1e-5, i_e=1.0, mu_z=0.5)
        assert report.rate == 0.0
        assert report.rate_unclamped < 0.0

    def test_error_free_reduction(self) -> None:
        """E_ZZ = 0 and I_E = 0 reduce R to mu^2 e^(-2 mu) S."""
        mu, s = 0.67, 1.084e-6
        report = secret_key_rate(q_zz=2.7e-6, e_zz=0.0, s_zz_11_lower=s, i_e=0.0, mu_z=mu)
        assert report.rate == pytest.approx(mu * mu * math.exp(-2.0 * mu) * s, rel=1e-12)

    def test_audit_fields_reproduce_rate(self) -> None:
        """recompute_rate uses only the echoed inputs."""
        report = secret_key_rate(
            q_zz=2.6622e-6,
            e_zz=0.006,
            s_zz_11_lower=1.084e-6,
            i_e=0.254,
            mu_z=0.67,
            p_zz=0.25,
            p_zz_mumu=0.25,
        )
        assert report.recompute_rate() == report.rate_unclamped

    @given(
        e1=st.floats(min_value=0.0, max_value=0.5),
        e2=st.floats(min_value=0.0, max_value=0.5),
        i_e=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_non_increasing_in_error_rate(self, e1: float, e2: float, i_e: float) -> None:
        """A larger E_ZZ never raises the rate."""
        assume(e1 <= e2)
        common = {"q_zz": 3e-6, "s_zz_11_lower": 6e-6, "i_e": i_e, "mu_z": 0.67}
        low = secret_key_rate(e_zz=e1, **common).rate_unclamped
        high = secret_key_rate(e_zz=e2, **common).rate_unclamped
        assert high <= low + 1e-20

    @given(i1=probabilities, i2=probabilities)
    def test_non_increasing_in_information(self, i1: float, i2: float) -> None:
        """A larger I_E never raises the rate."""
        assume(i1 <= i2)
        common = {"q_zz": 3e-6, "e_zz": 0.007, "s_zz_11_lower": 6e-6, "mu_z": 0.67}
        low = secret_key_rate(i_e=i1, **common).rate_unclamped
        high = secret_key_rate(i_e=i2, **common).rate_unclamped
        assert high <= low + 1e-20

    @pytest.mark.parametrize(
        "overrides",
        [{"mu_z": 0.0}, {"i_e": 1.2}, {"e_zz": -0.1}, {"p_zz": 2.0}],
        ids=["mu", "i_e", "e_zz", "p_zz"],
    )
    def test_preconditions(self, overrides: dict[str, float]) -> None:
        """Probabilities in [0, 1] and mu_z > 0."""
        args = {"q_zz": 1e-6, "e_zz": 0.01, "s_zz_11_lower": 1e-6, "i_e": 0.2, "mu_z": 0.5}
        with pytest.raises(DomainError):
            secret_key_rate(**{**args, **overrides})


class TestKeyRateFromEstimates:
    """Tests for combining decoy estimates into a report."""

    ESTIMATES = make_estimates(0.012, 0.012, 0.6, 0.03, lower=(0.0, 0.0, 0.55, 0.01))

    def test_information_at_upper_end(self) -> None:
        """I_E is evaluated at e_ZZ^U; the interval maximum is only reported."""
        report = key_rate_from_estimates(
            self.ESTIMATES, q_zz=2.7e-6, e_zz=0.006, protocol=make_protocol(), f_ec=1.16
        )
        assert report.i_e == eve_information_rfi(0.004, report.c_value)
        assert report.i_e_worst_case is not None
        assert report.i_e_worst_case >= report.i_e
        assert report.recompute_rate() == pytest.approx(report.rate_unclamped)

    def test_two_sided_c_in_rate(self) -> None:
        """An interval wholly above 0.5 still counts; the upper-end C is a diagnostic."""
        report = key_rate_from_estimates(
            self.ESTIMATES, q_zz=2.7e-6, e_zz=0.006, protocol=make_protocol(), f_ec=1.16
        )
        assert report.c_value == c_quantity_two_sided(self.ESTIMATES)
        assert report.c_simplified == c_quantity(self.ESTIMATES)
        assert report.c_simplified is not None
        assert report.c_value == pytest.approx(report.c_simplified + 0.01)

    def test_error_rate_above_half_flagged(self, caplog: pytest.LogCaptureFixture) -> None:
        """E_ZZ > 0.5 is capped for the leak term, logged and marked on the report."""
        with caplog.at_level(logging.WARNING, logger="mdi_keyrate.security"):
            report = key_rate_from_estimates(
                self.ESTIMATES, q_zz=2.7e-6, e_zz=0.62, protocol=make_protocol(), f_ec=1.16
            )
        assert report.e_zz == 0.5
        assert report.e_zz_clamped
        assert any("0.62" in line for line in report.diagnostics)
        assert "exceeds 0.5" in caplog.text

    def test_error_rate_below_half_not_flagged(self) -> None:
        """Ordinary error rates pass through untouched."""
        report = key_rate_from_estimates(
            self.ESTIMATES, q_zz=2.7e-6, e_zz=0.006, protocol=make_protocol(), f_ec=1.16
        )
        assert report.e_zz == 0.006
        assert not report.e_zz_clamped
        assert report.diagnostics == []
