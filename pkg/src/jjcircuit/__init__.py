"""Circuit quantization and spectrum engine for superconducting circuits."""

__version__ = "0.1.0"
