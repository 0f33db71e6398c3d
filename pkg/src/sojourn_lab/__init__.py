"""Sojourn times, Lavine energy widths and golden-rule resonance widths for finite Hamiltonians."""

__version__ = "0.1.0"
