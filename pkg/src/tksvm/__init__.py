"""Tensorial-kernel SVM for POVM snapshot data."""
__version__ = "0.1.0"
