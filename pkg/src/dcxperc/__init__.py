"""Clustering-ordered point processes and percolation of their Boolean models."""

__version__ = "0.1.0"
