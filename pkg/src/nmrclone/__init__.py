"""Approximate quantum cloning on a three-spin NMR register."""
__version__ = "0.1.0"
