"""Budgeted per-patient sequential feature acquisition."""

__version__ = "0.1.0"
