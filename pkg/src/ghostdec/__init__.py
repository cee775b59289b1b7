"""Decoding laboratory for fast transversal logic on rotated surface codes."""

__version__ = "0.1.0"
