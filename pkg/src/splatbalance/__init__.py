"""Workload-balancing laboratory for CPU Gaussian splatting."""

__version__ = "0.1.0"
