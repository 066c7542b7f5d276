"""Casimir-Polder shifts and surface-induced mixing of Rydberg atoms."""
__version__ = "0.1.0"
