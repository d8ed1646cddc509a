"""Computational Outer space: stretch factors and train track representatives."""

__version__ = "0.1.0"
