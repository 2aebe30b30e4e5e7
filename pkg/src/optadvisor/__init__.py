"""Profile-driven recommendation of source-code optimizations for GPU kernels."""

__version__ = "0.1.0"
