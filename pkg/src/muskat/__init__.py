"""Numerical simulation and verification toolkit for Muskat interfaces.

Modules
-------
curve        grids, periodic fields, curves, geometric functionals
quadrature   singular and near-singular integrals, Hilbert transform, Λ^s
dynamics     right-hand sides of the graph, two-phase and contour equations
evolve       adaptive DOPRI5(4) time stepping, node redistribution, Galerkin
turnover     construction and certification of turning initial data
diagnostics  maximum principle, L² decay identity, analyticity strip width
cli          command line front end
"""

__version__ = "0.1.0"

from .curve import Curve, GraphInterface, PeriodicField, PeriodicGrid  # noqa: E402
from .errors import MuskatError  # noqa: E402

__all__ = ["Curve", "GraphInterface", "PeriodicField", "PeriodicGrid", "MuskatError", "__version__"]
