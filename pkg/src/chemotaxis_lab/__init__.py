"""Numerical laboratory for two-species chemotaxis with local and nonlocal competition."""

__version__ = "0.1.0"
