"""Simulator and analytic checks for rational agreement with baiting rewards."""

__version__ = "0.1.0"
