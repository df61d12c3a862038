"""Gaussian-state fidelity, overlap and distinguishability toolkit."""

__version__ = "0.1.0"
