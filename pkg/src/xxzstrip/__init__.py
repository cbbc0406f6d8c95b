"""Numerical laboratory for droplet states of the XXZ model on a strip."""

__version__ = "0.1.0"
