"""Two-path interference in scattering of Bessel vortex electrons."""

__version__ = "0.1.0"
