"""Wigner functions, symplectic tomograms and their dynamics under general linear quantization."""

__version__ = "0.1.0"
