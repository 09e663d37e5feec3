"""Pulse-driven heteropolymer computer: simulator, compiler and analytics."""

__version__ = "0.1.0"
