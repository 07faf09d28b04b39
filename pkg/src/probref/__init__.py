"""Exact checking tools for termination-preserving refinement of probabilistic programs."""

__version__ = "0.1.0"
