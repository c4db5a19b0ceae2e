"""Measurement-induced purification in all-to-all random Clifford circuits."""

__version__ = "0.1.0"
