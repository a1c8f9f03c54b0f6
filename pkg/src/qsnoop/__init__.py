"""Crosstalk side-channel attack lab for multi-tenant quantum devices."""

__version__ = "0.1.0"
