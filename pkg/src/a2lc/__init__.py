"""Simulation engine for active and automated mask-level label correction."""

__version__ = "0.1.0"
