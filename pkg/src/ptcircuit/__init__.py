"""Gain/loss coupled RLC resonator pair with lossy inductors."""

__version__ = "0.1.0"
