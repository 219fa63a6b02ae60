"""Attractive headline generation with disentangled prototype style and content."""

__version__ = "0.1.0"
