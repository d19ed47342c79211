"""gaplab: eigenvalues and the fundamental gap of 1D Schrodinger and
p-Laplacian operators on (-1, 1) under Robin/Neumann/Dirichlet boundary
conditions, with numerical verification suites for the gap comparison
theorems (single-well, convex, and linear potentials) and the large-slope
Airy asymptotics."""

from .potentials import (
    Potential, PropertyFlags, parse_potential, serialize_potential,
    eval_potential, classify_potential, secant_line, random_family,
    constant, linear, polynomial, abs_scaled, sampled, reflect_potential,
)
from .problems import BoundaryCondition, Problem, Eigenpair, GapReport
from .ivp import integrate, shoot_state, riccati_integrate, ShotResult, RiccatiTrace
from .eigensolver import (
    solve_eigenpair, fundamental_gap, miss_function,
    analytic_zero_potential_p2, analytic_dirichlet_plaplace, pi_p,
)

__version__ = "0.1.0"
