"""Gamma-matrix readout error mitigation on a dense-matrix simulator."""

__version__ = "0.1.0"
