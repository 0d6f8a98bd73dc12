"""Error classes for key rate evaluation."""

from __future__ import annotations

from pathlib import Path


class KeyRateError(Exception):
    """Base class for every named failure of the key rate pipeline."""

    def __init__(self, message: str, detail: str | None = None) -> None:
        super().__init__(message)
        self.detail = detail


class DomainError(KeyRateError, ValueError):
    """Raised when a numeric argument lies outside an operation's domain."""


class ConfigurationError(KeyRateError):
    """Raised for unknown keys, unparsable values or inconsistent run configurations."""

    def __init__(self, message: str, key: str | None = None) -> None:
        super().__init__(message, detail=key)
        self.key = key


class InvalidSettingsError(ConfigurationError):
    """Raised when decoy intensities cannot support the two-decoy estimator."""

    def __init__(self, signal: float, decoy: float, reason: str | None = None) -> None:
        message = reason or (
            f"Decoy intensity {decoy:g} must be strictly below signal intensity {signal:g}"
        )
        super().__init__(message, key="nu_x")
        self.signal = signal
        self.decoy = decoy


class EstimationError(KeyRateError):
    """Raised when a single-photon bound cannot be formed from the observables."""

    def __init__(
        self,
        message: str,
        basis: str | None = None,
        observable: str | None = None,
        zero_yield: bool = False,
    ) -> None:
        super().__init__(message, detail=observable)
        self.basis = basis
        self.observable = observable
        self.zero_yield = zero_yield


class CountsSchemaError(KeyRateError):
    """Raised when a counts file is malformed or incomplete."""

    def __init__(self, message: str, path: Path | None = None, line_no: int | None = None) -> None:
        location = ""
        if path is not None:
            location = f"{path}:{line_no}: " if line_no is not None else f"{path}: "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line_no = line_no
