"""
Spherical Needlet Approximation Toolkit

Needlet filters, needlet frames built on spherical quadrature rules, discrete
needlet approximation (equivalently filtered hyperinterpolation), Wendland
test functions and the experiments that measure convergence on S².
"""

__version__ = "1.0.0"
__author__ = "Needlet Toolkit Developers"
