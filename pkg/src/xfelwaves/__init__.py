"""Spectral toolkit for a partially confined Hartree-Coulomb NLS."""

__version__ = "0.1.0"
