"""Geometric meta data and data mining for crash-simulation input decks."""

__version__ = "0.1.0"
