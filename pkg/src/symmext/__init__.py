"""Numerical toolkit for a four-set integral functional under split linear maps."""

__version__ = "0.1.0"
