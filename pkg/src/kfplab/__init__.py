"""Numerical harness for kinetic Fokker-Planck equations with rough diffusion.

Subpackages: ``coeffs`` (velocity fields, nondegeneracy, kinetic cylinders),
``solver`` (transport and Fokker-Planck solvers), ``averaging`` (velocity
averages, H^s norms, exponents), ``degiorgi`` (Moser and De Giorgi traces),
``holder`` (oscillation decay) and ``cli``.
"""
from .errors import KFPError, NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = ["KFPError", "NumericalError", "ValidationError", "__version__"]
