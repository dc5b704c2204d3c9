"""Pseudo-spectral Navier-Stokes solver on a periodic cylinder with an energy-bound verification harness."""

__version__ = "0.1.0"
