"""Protocol configuration: variant, intensities, sampling probabilities and conventions.

Sampling scheme
---------------
Each side independently sends the vacuum with probability ``p_o = 1 - p_z - 2*p_x``
(no basis is chosen for vacuum pulses), the Z basis with ``p_z`` and each of X and
Y with ``p_x``. Inside a decoyed basis the signal intensity is chosen with
probability ``p_x_signal`` and the decoy otherwise. The symmetric scheme decoys
every basis with ``{mu, nu}``; the biased scheme sends Z only at ``mu_z`` and
decoys X/Y with ``{mu_x, nu_x}``. The fraction of transmitted pulse pairs that
land in one (basis pair, label pair) cell is the product of the two sides'
label probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from pydantic import BaseModel, Field, model_validator

from mdi_keyrate.errors import ConfigurationError, InvalidSettingsError
from mdi_keyrate.model.channel import MisalignmentAngle
from mdi_keyrate.model.observables import BasisPair


class ProtocolVariant(str, Enum):
    """Security analysis applied to the sifted data."""

    RFI = "rfi"
    ORIGINAL = "original"


class EvaluationMode(str, Enum):
    """Infinite-data or finite-size evaluation."""

    ASYMPTOTIC = "asymptotic"
    FINITE = "finite"


class SamplingScheme(str, Enum):
    """How intensities are assigned to bases."""

    SYMMETRIC = "symmetric"
    BIASED = "biased"


class PrefactorMode(str, Enum):
    """How the sifting prefactors P_zz and P_zz^{mu mu} are set."""

    UNIT = "unit"
    SAMPLING = "sampling"


class IEBound(str, Enum):
    """Convention for the u parameter of the RFI information bound."""

    PRINTED = "printed"
    ROOT = "root"


class DecoyT1Form(str, Enum):
    """Vacuum coefficient on the M^{mu o} term of the decoy lower bound."""

    SYMMETRIC = "symmetric"
    PRINTED = "printed"


class IntensityLabel(str, Enum):
    """Intensity level names as they appear in counts files."""

    MU_Z = "mu_z"
    MU_X = "mu_x"
    NU_X = "nu_x"
    VACUUM = "o"
    MU = "mu"
    NU = "nu"


@dataclass(frozen=True)
class IntensitySettings:
    """Resolved intensity levels of one protocol.

    The symmetric scheme collapses ``mu_z = mu_x = mu`` and ``nu_x = nu``.

    Raises:
        InvalidSettingsError: If the decoy is not strictly between vacuum and signal.
    """

    scheme: SamplingScheme
    mu_z: float
    mu_x: float
    nu_x: float

    def __post_init__(self) -> None:
        if not (0.0 < self.nu_x < self.mu_x):
            raise InvalidSettingsError(self.mu_x, self.nu_x)
        if self.mu_z <= 0.0:
            raise InvalidSettingsError(
                self.mu_z, self.nu_x, reason=f"Signal intensity mu_z must be > 0, got {self.mu_z:g}"
            )

    @classmethod
    def symmetric(cls, mu: float, nu: float) -> IntensitySettings:
        return cls(SamplingScheme.SYMMETRIC, mu, mu, nu)

    @classmethod
    def biased(cls, mu_z: float, mu_x: float, nu_x: float) -> IntensitySettings:
        return cls(SamplingScheme.BIASED, mu_z, mu_x, nu_x)

    def labels_for(self, basis: BasisPair) -> tuple[IntensityLabel, ...]:
        """Intensity labels a side may send in the given basis pair, vacuum last."""
        if self.scheme is SamplingScheme.SYMMETRIC:
            return (IntensityLabel.MU, IntensityLabel.NU, IntensityLabel.VACUUM)
        if basis is BasisPair.ZZ:
            return (IntensityLabel.MU_Z, IntensityLabel.VACUUM)
        return (IntensityLabel.MU_X, IntensityLabel.NU_X, IntensityLabel.VACUUM)

    def signal_label(self, basis: BasisPair) -> IntensityLabel:
        return self.labels_for(basis)[0]

    def decoy_label(self, basis: BasisPair) -> IntensityLabel | None:
        labels = self.labels_for(basis)
        return labels[1] if len(labels) == 3 else None

    def has_decoy(self, basis: BasisPair) -> bool:
        return self.decoy_label(basis) is not None

    def intensity(self, label: IntensityLabel) -> float:
        """Mean photon number of a label.

        Raises:
            ConfigurationError: If the label does not belong to this scheme.
        """
        if label is IntensityLabel.VACUUM:
            return 0.0
        symmetric = self.scheme is SamplingScheme.SYMMETRIC
        if symmetric and label is IntensityLabel.MU:
            return self.mu_x
        if symmetric and label is IntensityLabel.NU:
            return self.nu_x
        if not symmetric and label is IntensityLabel.MU_Z:
            return self.mu_z
        if not symmetric and label is IntensityLabel.MU_X:
            return self.mu_x
        if not symmetric and label is IntensityLabel.NU_X:
            return self.nu_x
        raise ConfigurationError(
            f"Intensity level '{label.value}' is not defined by the {self.scheme.value} scheme",
            key=label.value,
        )


class ProtocolConfig(BaseModel):
    """Protocol variant, intensities, probabilities and analysis conventions."""

    variant: ProtocolVariant = Field(default=ProtocolVariant.RFI, description="Security analysis")
    scheme: SamplingScheme = Field(
        default=SamplingScheme.SYMMETRIC, description="Intensity-to-basis assignment"
    )
    mu_z: float = Field(default=0.67, gt=0.0, le=1.5, description="Z-basis signal intensity")
    mu_x: float = Field(default=0.67, gt=0.0, le=1.5, description="X/Y signal intensity")
    nu_x: float = Field(default=0.01, gt=0.0, le=1.5, description="X/Y decoy intensity")
    beta_deg: float = Field(default=0.0, description="Reference-frame deviation in degrees")
    p_z: float = Field(default=0.5, gt=0.0, lt=1.0, description="Probability of the Z basis")
    p_x: float = Field(default=0.2, gt=0.0, lt=0.5, description="Probability of each of X and Y")
    p_x_signal: float = Field(
        default=0.5, gt=0.0, lt=1.0, description="Signal share within a decoyed basis"
    )
    prefactors: PrefactorMode = Field(
        default=PrefactorMode.UNIT, description="Sifting prefactors in the rate formula"
    )
    ie_bound: IEBound = Field(default=IEBound.PRINTED, description="u-parameter convention")
    decoy_t1: DecoyT1Form = Field(
        default=DecoyT1Form.SYMMETRIC, description="Vacuum coefficient of the M^{mu o} term"
    )

    @model_validator(mode="after")
    def validate_combination(self) -> ProtocolConfig:
        """Check intensity ordering, the symmetric collapse and the vacuum probability."""
        if self.nu_x >= self.mu_x:
            raise ValueError(f"nu_x ({self.nu_x:g}) must be below mu_x ({self.mu_x:g})")
        if self.scheme is SamplingScheme.SYMMETRIC and self.mu_z != self.mu_x:
            raise ValueError(
                "symmetric scheme uses a single signal intensity; set 'mu' or make mu_z == mu_x"
            )
        if self.p_z + 2.0 * self.p_x >= 1.0:
            raise ValueError(
                f"p_z + 2*p_x must leave a vacuum probability > 0 "
                f"(got {self.p_z:g} + 2*{self.p_x:g})"
            )
        return self

    @property
    def misalignment(self) -> MisalignmentAngle:
        return MisalignmentAngle.from_degrees(self.beta_deg)

    @property
    def p_vacuum(self) -> float:
        """Per-side probability of sending the vacuum."""
        return 1.0 - self.p_z - 2.0 * self.p_x

    def intensity_settings(self) -> IntensitySettings:
        return IntensitySettings(self.scheme, self.mu_z, self.mu_x, self.nu_x)

    def side_probability(self, basis_letter: str, label: IntensityLabel) -> float:
        """Probability that one side sends ``label`` while announcing ``basis_letter``.

        A vacuum side carries no basis, so its probability is ``p_o`` whichever
        basis pair the cell is filed under.
        """
        if label is IntensityLabel.VACUUM:
            return self.p_vacuum
        basis_prob = self.p_z if basis_letter == "Z" else self.p_x
        decoyed = self.scheme is SamplingScheme.SYMMETRIC or basis_letter != "Z"
        if not decoyed:
            return basis_prob
        if label in (IntensityLabel.NU, IntensityLabel.NU_X):
            return basis_prob * (1.0 - self.p_x_signal)
        return basis_prob * self.p_x_signal

    def pair_fraction(
        self, basis: BasisPair, label_a: IntensityLabel, label_b: IntensityLabel
    ) -> float:
        """Fraction of transmitted pulse pairs falling into one cell."""
        return self.side_probability(basis.alice, label_a) * self.side_probability(
            basis.bob, label_b
        )

    def key_prefactors(self, mode: PrefactorMode | None = None) -> tuple[float, float]:
        """Return (P_zz, P_zz^{mu mu}) under the given or configured prefactor mode."""
        mode = mode or self.prefactors
        if mode is PrefactorMode.UNIT:
            return 1.0, 1.0
        signal_share = 1.0 if self.scheme is SamplingScheme.BIASED else self.p_x_signal**2
        return self.p_z**2, signal_share
