"""Numerical laboratory for the Yamabe problem on radial model manifolds."""

__version__ = "0.1.0"
