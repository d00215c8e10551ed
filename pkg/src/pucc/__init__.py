"""Packing unequal circles into the smallest circular container."""

__version__ = "0.1.0"
