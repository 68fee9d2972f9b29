"""Thermodynamic formalism for linear center isometries of tori."""

__version__ = "0.1.0"
