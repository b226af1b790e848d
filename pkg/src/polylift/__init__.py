"""Graphs from lifts of matrix polynomials: construction, spectra and certificates."""

__version__ = "0.1.0"
