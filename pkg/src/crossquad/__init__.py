"""Biased two-parent crossover for K-degree pseudo-Boolean costs."""

__version__ = "0.1.0"
