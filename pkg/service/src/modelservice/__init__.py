"""Stub-first inference service for the graphsum pipeline."""

__version__ = "0.1.0"
