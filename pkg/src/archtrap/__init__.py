"""Structural safety analysis for parameterized component systems."""

__version__ = "0.1.0"
