"""Quantum contract signing: protocol simulator and fairness analysis."""

__version__ = "0.1.0"
