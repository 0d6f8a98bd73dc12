"""Channel and detector parameters, distances and the misalignment angle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field


class Arm(str, Enum):
    """Fiber arm feeding the relay."""

    ALICE = "a"
    BOB = "b"


class ChannelParams(BaseModel):
    """Detector and fiber parameters of a symmetric-detector relay.

    Defaults are the laboratory values used throughout the simulations:
    12.5% detectors, 1.2e-6 dark counts per gate, 0.5% misalignment error,
    0.195 dB/km fiber and an error-correction efficiency of 1.16.
    """

    model_config = ConfigDict(frozen=True)

    eta_d: float = Field(default=0.125, ge=0.0, le=1.0, description="Detector efficiency")
    p_d: float = Field(default=1.2e-6, ge=0.0, le=1.0, description="Dark counts per gate")
    e_d: float = Field(default=0.005, ge=0.0, le=1.0, description="Misalignment error probability")
    alpha: float = Field(default=0.195, ge=0.0, description="Fiber attenuation in dB/km")
    f_ec: float = Field(default=1.16, ge=1.0, description="Error-correction efficiency")
    dist_a: float = Field(default=0.0, ge=0.0, description="Alice to relay fiber length in km")
    dist_b: float = Field(default=0.0, ge=0.0, description="Bob to relay fiber length in km")

    @classmethod
    def symmetric(cls, distance_per_arm: float, **kwargs: Any) -> ChannelParams:
        """Build parameters with both arms of the same length."""
        return cls(dist_a=distance_per_arm, dist_b=distance_per_arm, **kwargs)

    @classmethod
    def from_total_distance(cls, total_distance: float, **kwargs: Any) -> ChannelParams:
        """Build parameters from the Alice-Bob distance, split evenly between the arms."""
        half = total_distance / 2.0
        return cls(dist_a=half, dist_b=half, **kwargs)

    @property
    def total_distance(self) -> float:
        """Alice-Bob fiber distance in km."""
        return self.dist_a + self.dist_b

    def distance(self, arm: Arm) -> float:
        """Fiber length of one arm."""
        return self.dist_a if arm == Arm.ALICE else self.dist_b


def link_efficiency(params: ChannelParams, arm: Arm) -> float:
    """Overall transmittance of one arm including the detector: eta_d * 10^(-alpha*L/10)."""
    return params.eta_d * 10.0 ** (-params.alpha * params.distance(arm) / 10.0)


@dataclass(frozen=True)
class MisalignmentAngle:
    """Relative reference-frame deviation of the X/Y bases, stored in radians."""

    beta: float = 0.0

    @classmethod
    def from_degrees(cls, degrees: float) -> MisalignmentAngle:
        return cls(beta=math.radians(degrees))

    @property
    def degrees(self) -> float:
        return math.degrees(self.beta)

    @property
    def cos(self) -> float:
        return math.cos(self.beta)

    @property
    def sin(self) -> float:
        return math.sin(self.beta)
