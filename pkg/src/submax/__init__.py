"""Submodular maximization on a simulated massively parallel cluster."""

__version__ = "0.1.0"
