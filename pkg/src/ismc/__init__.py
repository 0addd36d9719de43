"""Importance sampling estimators, multiple and adaptive importance sampling."""

__version__ = "0.1.0"
