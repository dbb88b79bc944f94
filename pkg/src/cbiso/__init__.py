"""Finite-dimensional workbench for completely bounded isomorphisms."""

__version__ = "0.1.0"
