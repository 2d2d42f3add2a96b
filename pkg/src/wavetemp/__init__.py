"""Madelung decomposition, information measures and the wave-function
temperature field on uniform 1D/2D grids."""

__version__ = "0.1.0"
