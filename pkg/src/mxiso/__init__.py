"""Multiplex isomorphism classes and isomorphism-aware trajectory benchmarks."""

__version__ = "0.1.0"
