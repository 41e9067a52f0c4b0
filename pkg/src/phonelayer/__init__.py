"""Allophone-aware multilingual phone recognition at desk scale."""

__version__ = "0.1.0"
