"""Numerical laboratory for 2D Ricci flow and the metric geometry around it."""
__version__ = "0.1.0"
