"""Desk-scale laboratory for early-learning regularization under label noise."""

__version__ = "0.1.0"
