"""Spectral optimization of Schrodinger operators -Delta + mu on truncated grids."""

__version__ = "0.1.0"
