"""Problem and result types for the eigenvalue solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .potentials import Potential


@dataclass(frozen=True)
class BoundaryCondition:
    """Robin condition u'(+-1) = -+ alpha*u(+-1) (p-form with |u'|^{p-2}u'),
    or homogeneous Dirichlet when ``alpha`` is None.

    alpha = 0 is the Neumann case; alpha -> +inf recovers Dirichlet.
    """

    alpha: float | None

    @classmethod
    def robin(cls, alpha: float) -> "BoundaryCondition":
        return cls(float(alpha))

    @classmethod
    def neumann(cls) -> "BoundaryCondition":
        return cls(0.0)

    @classmethod
    def dirichlet(cls) -> "BoundaryCondition":
        return cls(None)

    @property
    def is_dirichlet(self) -> bool:
        return self.alpha is None

    @property
    def is_neumann(self) -> bool:
        return self.alpha == 0.0

    def __str__(self) -> str:
        return "dirichlet" if self.is_dirichlet else f"robin({self.alpha:g})"


@dataclass(frozen=True)
class Problem:
    """Eigenvalue problem for -(|u'|^{p-2}u')' + V|u|^{p-2}u on (-1, 1)."""

    p: float
    potential: Potential
    bc: BoundaryCondition

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"p must exceed 1, got {self.p}")


@dataclass
class Eigenpair:
    """Indexed eigenvalue with its sampled normalized eigenfunction.

    The eigenfunction satisfies int |u|^p dx = 1 with u > 0 near x = -1,
    and has exactly ``index`` interior zeros.
    """

    index: int
    lam: float
    grid: np.ndarray
    u: np.ndarray
    du: np.ndarray
    interior_zeros: list[float]
    problem: Problem
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def boundary_values(self) -> tuple[float, float]:
        return float(self.u[0]), float(self.u[-1])


@dataclass
class GapReport:
    """Fundamental gap lam1 - lam0 with solver diagnostics."""

    lam0: float
    lam1: float
    gap: float
    diagnostics: dict[str, Any] = field(default_factory=dict)
