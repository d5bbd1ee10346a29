"""Fixed-time and input-to-state boundary stabilization of 1-D parabolic PDEs."""

__version__ = "0.1.0"
