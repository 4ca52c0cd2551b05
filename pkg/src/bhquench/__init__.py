"""Mott-insulator quench dynamics of the Bose-Hubbard model.

Truncated equations for on-site probabilities and pair correlations,
checked against first-order analytic solutions and against exact
diagonalization on small lattices.
"""

from .lattice import Lattice, LatticeSpec, build_hypercubic, chain, square
from .state import Layout, SystemState, initial_mott
from .dynamics import HamiltonianParams, IntegratorConfig, evolve, step_rk4

__version__ = "0.1.0"

__all__ = [
    "HamiltonianParams",
    "IntegratorConfig",
    "Lattice",
    "LatticeSpec",
    "Layout",
    "SystemState",
    "build_hypercubic",
    "chain",
    "evolve",
    "initial_mott",
    "square",
    "step_rk4",
    "__version__",
]
