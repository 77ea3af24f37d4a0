"""Invariant-inference laboratory over propositional transition systems."""

__version__ = "0.1.0"
