"""Neumann-Poincare spectra, symbol flows and concentration diagnostics on closed surfaces."""

__version__ = "0.1.0"
