"""Exact engine for characteristic forms on the space of torsion-free connections."""
__version__ = "0.1.0"
