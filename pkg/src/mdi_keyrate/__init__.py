"""MDI Keyrate - secret key rates for original and reference-frame-independent MDI-QKD."""

__version__ = "0.1.0"
