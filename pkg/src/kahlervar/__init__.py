"""Numerical verification of Kahler variation formulas on flat complex tori."""

__version__ = "0.1.0"
