"""Statevector laboratory for concentration and anti-concentration in variational circuits."""

__version__ = "0.1.0"
