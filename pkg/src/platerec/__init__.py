"""Monocular thin-plate surface reconstruction with an adversarial regularizer."""

__version__ = "0.1.0"
