"""Segmentation adapter emitting MATT mask interchange files."""

__version__ = "0.1.0"
