"""Statevector emulation of two-site DMFT for the single-impurity Anderson model."""

from .params import PoleFit, SiamParams

__version__ = "0.1.0"

__all__ = ["PoleFit", "SiamParams", "__version__"]
