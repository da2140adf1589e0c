"""Topology of two-dimensional loss landscapes: sampling, merge trees, persistence, Hessian metrics."""

__version__ = "0.1.0"
