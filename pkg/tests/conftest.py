"""Pytest fixtures for mdi-keyrate tests."""

from collections.abc import Iterator
from pathlib import Path

import pytest

from mdi_keyrate.finitekey import CountsTable, FiniteKeyConfig, synthesize_counts
from mdi_keyrate.logging import reset_logging
from mdi_keyrate.model.channel import ChannelParams
from mdi_keyrate.model.observables import ObservableTable, observable_table
from mdi_keyrate.protocol import ProtocolConfig, SamplingScheme

# Biased-scheme point with a positive finite-size rate at 40 km per arm
BIASED_POINT = {
    "mu_z": 0.29,
    "mu_x": 0.38,
    "nu_x": 0.064,
    "p_z": 0.50,
    "p_x": 0.18,
    "p_x_signal": 0.20,
}


def make_protocol(**overrides: object) -> ProtocolConfig:
    """Factory for protocol configurations on top of the defaults."""
    return ProtocolConfig.model_validate(overrides)


def make_biased_protocol(**overrides: object) -> ProtocolConfig:
    """Factory for the biased four-intensity scheme at the reference point."""
    return ProtocolConfig.model_validate(
        {"scheme": SamplingScheme.BIASED, **BIASED_POINT, **overrides}
    )


# --- Channel Fixtures ---


@pytest.fixture
def lab_channel() -> ChannelParams:
    """Laboratory detector and fiber parameters with zero-length arms."""
    return ChannelParams()


@pytest.fixture
def channel_80km() -> ChannelParams:
    """80 km per arm (160 km between Alice and Bob)."""
    return ChannelParams.symmetric(80.0)


@pytest.fixture
def channel_40km() -> ChannelParams:
    """40 km per arm."""
    return ChannelParams.symmetric(40.0)


# --- Protocol Fixtures ---


@pytest.fixture
def symmetric_protocol() -> ProtocolConfig:
    """Symmetric three-intensity scheme at mu = 0.67, nu = 0.01, beta = 0."""
    return make_protocol()


@pytest.fixture
def biased_protocol() -> ProtocolConfig:
    """Biased four-intensity scheme at the reference point, beta = 0."""
    return make_biased_protocol()


@pytest.fixture
def finite_config() -> FiniteKeyConfig:
    """N = 3e12 pulse pairs, epsilon = 1e-10."""
    return FiniteKeyConfig(n_pairs=3e12, epsilon=1e-10)


# --- Observable Fixtures ---


@pytest.fixture
def table_80km(symmetric_protocol: ProtocolConfig, channel_80km: ChannelParams) -> ObservableTable:
    """Model observables of the symmetric scheme at 80 km per arm."""
    return observable_table(symmetric_protocol, channel_80km)


@pytest.fixture
def biased_counts(biased_protocol: ProtocolConfig, channel_40km: ChannelParams) -> CountsTable:
    """Counts synthesized from the model for the biased scheme at 40 km per arm."""
    return synthesize_counts(biased_protocol, channel_40km, 3e12)


# --- Environment Fixtures ---


@pytest.fixture
def isolated_settings(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Iterator[Path]:
    """Point config and log directories at a temporary tree and reset logging afterwards."""
    monkeypatch.setenv("MDI_KEYRATE_CONFIG_DIR", str(tmp_path / "config"))
    monkeypatch.setenv("MDI_KEYRATE_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("MDI_KEYRATE_MAX_WORKERS", "2")
    monkeypatch.chdir(tmp_path)
    yield tmp_path
    reset_logging()
