"""Perishable multi-echelon inventory simulation and reinforcement-learning suite."""

__version__ = "0.1.0"
