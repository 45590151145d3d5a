"""Pseudo-spectral thermohaline circulation model and verification harness."""

__version__ = "0.1.0"
