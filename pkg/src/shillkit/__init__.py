"""Shilling-attack toolkit: rating data, victim recommenders, attackers and evaluation."""
__version__ = "0.1.0"
