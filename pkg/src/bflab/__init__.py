"""Numerical laboratory for balanced embeddings and curvature flows on CP^1."""

__version__ = "0.1.0"
