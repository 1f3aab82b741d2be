"""Semiclassical atom dynamics in a standing laser wave."""

__version__ = "1.0.0"
