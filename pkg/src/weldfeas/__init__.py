"""Welding-trajectory feasibility for 6R arms (PUMA-like and UR-like morphologies)."""

__version__ = "0.1.0"
