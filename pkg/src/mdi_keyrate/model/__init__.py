"""Analytic channel model: gains and error rates of the relay's Bell-state measurement."""

from mdi_keyrate.model.bessel import bessel_i0, bessel_i0_minus_one
from mdi_keyrate.model.channel import Arm, ChannelParams, MisalignmentAngle, link_efficiency
from mdi_keyrate.model.observables import (
    CORRELATION_PAIRS,
    BasisPair,
    GainErrorRecord,
    IntensityPair,
    ModelIntermediates,
    ObservableKind,
    ObservableTable,
    model_intermediates,
    observable_table,
    pair_observables,
)

__all__ = [
    # Special functions
    "bessel_i0",
    "bessel_i0_minus_one",
    # Channel
    "Arm",
    "ChannelParams",
    "MisalignmentAngle",
    "link_efficiency",
    # Observables
    "BasisPair",
    "CORRELATION_PAIRS",
    "GainErrorRecord",
    "IntensityPair",
    "ModelIntermediates",
    "ObservableKind",
    "ObservableTable",
    "model_intermediates",
    "observable_table",
    "pair_observables",
]
