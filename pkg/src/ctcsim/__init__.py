"""Equivalent-circuit simulator for quantum systems on Deutsch closed timelike curves."""

__version__ = "0.1.0"
