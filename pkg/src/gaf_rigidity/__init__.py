"""Gaussian entire functions with admissible kernels: zeros, variance of
linear statistics and recovery of zeros inside a disk from those outside."""

__version__ = "0.1.0"
