"""
VibraCav Package

Numerical library and command-line tool for the resonantly vibrating
one-dimensional cavity: Bogoliubov coefficients, quadrature squeezing,
photon numbers and photon-number distributions.
"""

__version__ = "1.0.0"
