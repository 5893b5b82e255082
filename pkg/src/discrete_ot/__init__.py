"""Discrete approximation of optimal transport on compact metric spaces."""
__version__ = "0.1.0"
