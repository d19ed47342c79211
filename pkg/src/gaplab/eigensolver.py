"""Indexed eigenpairs and the fundamental gap via shooting.

Eigenvalues are located by bisection on a monotone phase: the interior
sign-change count of the shot solution plus the angle of the right
endpoint state (u, w) in the Phi_p phase plane.  The count is
non-decreasing in lambda (Sturm oscillation) and the endpoint
log-derivative decreases strictly between its poles, so the combined
phase increases strictly through the boundary-condition angle exactly
once per eigenvalue.  This certifies the index of every root the
bisection encloses.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson

from .ivp import ShotResult, phi, shoot_state
from .potentials import Potential, constant
from .problems import BoundaryCondition, Eigenpair, GapReport, Problem

__all__ = [
    "SearchError", "PrecisionError", "default_tolerance", "miss_function",
    "solve_eigenpair", "fundamental_gap", "analytic_zero_potential_p2",
    "analytic_dirichlet_plaplace", "pi_p",
]

DEFAULT_GRID_N = 4097
_BRACKET_START = 50.0
_BRACKET_LIMIT = 1e6
_MAX_BISECTIONS = 300


class SearchError(RuntimeError):
    """No bracket below the search limit, or an index mismatch."""


class PrecisionError(RuntimeError):
    """Requested tolerance unreachable; carries the achieved width."""

    def __init__(self, width: float):
        super().__init__(f"bisection stalled at bracket width {width:.3e}")
        self.width = width


def default_tolerance(p: float) -> float:
    """Eigenvalue tolerance: tighter for the classical p = 2 case."""
    return 1e-10 if p == 2.0 else 1e-8


def _shot_rtol(tol: float) -> float:
    return min(1e-9, max(1e-13, 0.1 * tol))


def miss_function(problem: Problem, lam: float,
                  rtol: float = 1e-11) -> tuple[float, int]:
    """Right-endpoint boundary residual of the left-seeded shot.

    Robin(alpha): w(1) + alpha*Phi_p(u(1)); Dirichlet: u(1).  The
    renormalization factor exp(log_scale) multiplies both terms, so it
    is dropped as a common positive factor (sign preserved).
    """
    shot = shoot_state(problem, lam, rtol=rtol)
    return _miss_of_shot(shot, problem), shot.nodal_count


def _miss_of_shot(shot: ShotResult, problem: Problem) -> float:
    if problem.bc.is_dirichlet:
        return shot.u_end
    return shot.w_end + problem.bc.alpha * phi(shot.u_end, problem.p - 1.0)


def _miss_scale(shot: ShotResult, problem: Problem) -> float:
    """Magnitude of the terms the miss residual cancels between."""
    if problem.bc.is_dirichlet:
        return abs(shot.u_end) + abs(shot.w_end)
    return abs(shot.w_end) + abs(problem.bc.alpha) * abs(shot.u_end) ** (problem.p - 1.0)


def _past_root(shot: ShotResult, problem: Problem, index: int) -> bool:
    """Whether the trial lambda lies at or beyond the index-th eigenvalue.

    Sturm oscillation makes the interior sign-change count of the shot
    non-decreasing in lambda; a Dirichlet eigenvalue is exactly where the
    count steps to index+1.  Under a Robin condition the count equals the
    index on a whole band around the eigenvalue, and there the residual
    w(1) + alpha*Phi_p(u(1)) = Phi_p(u(1)) * (v(1) + alpha) crosses zero
    from the (-1)^index side, because the endpoint log-derivative v(1)
    decreases strictly in lambda between its poles.  Using the parity of
    the count instead of the computed sign of u(1) keeps the test stable
    when u(1) grazes zero at roundoff level.
    """
    count = shot.nodal_count
    if problem.bc.is_dirichlet:
        return count >= index + 1
    if count > index:
        return True
    if count < index:
        return False
    oriented = _miss_of_shot(shot, problem) * (-1.0 if index % 2 else 1.0)
    return oriented <= 0.0


def _grazes(shot: ShotResult, problem: Problem, rtol: float) -> bool:
    """True when the boundary residual is below integration noise, i.e.
    the shot sits numerically on an eigenvalue."""
    return abs(_miss_of_shot(shot, problem)) <= 10.0 * rtol * _miss_scale(shot, problem)


def _certified(shot_lo: ShotResult, shot_hi: ShotResult, index: int,
               problem: Problem, rtol: float) -> bool:
    """Index certificate for the final bracket.

    Below the eigenvalue the count must equal the index.  Above it the
    count stays at the index under a Robin condition until the next zero
    enters at mu_index > lambda_index, so both values certify; under
    Dirichlet the eigenvalue is the step itself.  An end whose residual
    sits below integration noise lies on the root and certifies trivially.
    """
    ok_lo = shot_lo.nodal_count == index or _grazes(shot_lo, problem, rtol)
    if problem.bc.is_dirichlet:
        ok_hi = shot_hi.nodal_count == index + 1
    else:
        ok_hi = shot_hi.nodal_count in (index, index + 1)
    return ok_lo and (ok_hi or _grazes(shot_hi, problem, rtol))


def _bracket_eigenvalue(problem: Problem, index: int, tol: float, rtol: float):
    """Expanding search then bisection; returns (lo, hi, shot_lo, shot_hi, diag)."""
    m = _BRACKET_START
    lo, hi = -m, m
    shot_lo = shoot_state(problem, lo, rtol=rtol)
    shot_hi = shoot_state(problem, hi, rtol=rtol)
    n_shots = 2
    while _past_root(shot_lo, problem, index) or \
            not _past_root(shot_hi, problem, index):
        m *= 2.0
        if m > _BRACKET_LIMIT:
            raise SearchError(
                f"no bracket for index {index} below |lambda| = {_BRACKET_LIMIT:g}")
        if _past_root(shot_lo, problem, index):
            lo = -m
            shot_lo = shoot_state(problem, lo, rtol=rtol)
            n_shots += 1
        if not _past_root(shot_hi, problem, index):
            hi = m
            shot_hi = shoot_state(problem, hi, rtol=rtol)
            n_shots += 1
    iterations = 0
    while True:
        width = hi - lo
        if width <= tol and _certified(shot_lo, shot_hi, index, problem, rtol):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            if not _certified(shot_lo, shot_hi, index, problem, rtol):
                raise SearchError(f"index certification failed at width {width:.3e}")
            raise PrecisionError(width)
        iterations += 1
        if iterations > _MAX_BISECTIONS:
            raise PrecisionError(width)
        shot_mid = shoot_state(problem, mid, rtol=rtol)
        n_shots += 1
        if _past_root(shot_mid, problem, index):
            hi, shot_hi = mid, shot_mid
        else:
            lo, shot_lo = mid, shot_mid
    m_lo, m_hi = _miss_of_shot(shot_lo, problem), _miss_of_shot(shot_hi, problem)
    if m_lo * m_hi > 0.0 and not (_grazes(shot_lo, problem, rtol)
                                  or _grazes(shot_hi, problem, rtol)):
        raise SearchError(
            f"miss function does not change sign across [{lo}, {hi}]")
    diag = {"iterations": iterations, "bracket_width": hi - lo,
            "n_shots": n_shots}
    return lo, hi, shot_lo, shot_hi, diag


def _refine_zero(traj, xa: float, xb: float) -> float:
    ua = traj(xa)[0]
    for _ in range(80):
        xm = 0.5 * (xa + xb)
        if xm <= xa or xm >= xb:
            break
        um = traj(xm)[0]
        if um == 0.0:
            return xm
        if (ua > 0) == (um > 0):
            xa, ua = xm, um
        else:
            xb = xm
        if xb - xa < 1e-13:
            break
    return 0.5 * (xa + xb)


def _reconstruct(problem: Problem, index: int, lam: float, shot: ShotResult,
                 n: int) -> Eigenpair:
    """Eigenpair from the certified lower-bracket shot.

    The shot was taken within tol of the reported lambda; its sign-change
    count equals the index by the bracket certification, which avoids the
    spurious near-boundary zero a shot marginally above a Dirichlet
    eigenvalue would carry.
    """
    p = problem.p
    xs = np.linspace(-1.0, 1.0, n)
    u = np.empty(n)
    du = np.empty(n)
    traj = shot.trajectory
    eq = 1.0 / (p - 1.0)
    for j, x in enumerate(xs):
        y = traj(float(x))
        ls = traj.scale_at(float(x)) * eq  # log factor on u
        s = math.exp(ls)
        u[j] = y[0] * s
        du[j] = phi(y[1], eq) * s
    norm = simpson(np.abs(u) ** p, x=xs) ** (1.0 / p)
    u /= norm
    du /= norm
    lead = np.argmax(np.abs(u) > 1e-3 * np.max(np.abs(u)))
    if u[lead] < 0.0:
        u = -u
        du = -du
    zeros = sorted(_refine_zero(traj, xa, xb) for xa, xb in shot.zero_brackets)
    if len(zeros) != index:
        raise SearchError(
            f"eigenfunction for index {index} has {len(zeros)} interior zeros")
    return Eigenpair(index, lam, xs, u, du, zeros, problem)


@lru_cache(maxsize=256)
def _solve_cached(problem: Problem, index: int, tol: float, n: int) -> Eigenpair:
    rtol = _shot_rtol(tol)
    lo, hi, shot_lo, shot_hi, diag = _bracket_eigenvalue(problem, index, tol, rtol)
    lam = 0.5 * (lo + hi)
    if shot_lo.nodal_count == index:
        shot = shot_lo
    elif shot_hi.nodal_count == index:
        shot = shot_hi
    else:
        # both bracket ends graze the root with noisy counts; back off a
        # little below the bracket where the count is unambiguous
        back = lo - max(2.0 * tol, 100.0 * rtol * (1.0 + abs(lo)))
        shot = shoot_state(problem, back, rtol=rtol)
        if shot.nodal_count != index:
            raise SearchError(
                f"cannot locate an index-{index} shot near lambda={lam!r}")
    pair = _reconstruct(problem, index, lam, shot, n)
    pair.diagnostics = diag
    return pair


def solve_eigenpair(problem: Problem, index: int, tol: float | None = None,
                    n: int = DEFAULT_GRID_N) -> Eigenpair:
    """Eigenpair of the given index, normalized to int |u|^p dx = 1 with
    u > 0 near x = -1.

    Results are cached per (problem, index, tol, n); treat the returned
    arrays as read-only.
    """
    if index < 0:
        raise ValueError("index must be >= 0")
    if tol is None:
        tol = default_tolerance(problem.p)
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _solve_cached(problem, index, float(tol), int(n))


def fundamental_gap(problem: Problem, tol: float | None = None) -> GapReport:
    """Gap lambda_1 - lambda_0 with bracket/iteration diagnostics."""
    e0 = solve_eigenpair(problem, 0, tol)
    e1 = solve_eigenpair(problem, 1, tol)
    diag = {}
    for i, e in ((0, e0), (1, e1)):
        for key, val in e.diagnostics.items():
            diag[f"{key}_{i}"] = val
    gap = e1.lam - e0.lam
    if gap <= 0.0:
        raise SearchError(f"nonpositive gap {gap}: eigenvalue ordering violated")
    return GapReport(e0.lam, e1.lam, gap, diag)


# ---------------------------------------------------------------------------
# closed-form references
# ---------------------------------------------------------------------------

def _bisect_root(f, a: float, b: float, xtol: float = 1e-12) -> float:
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise ValueError(f"no sign change on [{a}, {b}]")
    while b - a > xtol:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def analytic_zero_potential_p2(bc: BoundaryCondition, index: int) -> float:
    """Exact eigenvalues of -u'' = lambda*u on (-1,1) for V = 0, p = 2.

    Dirichlet: ((i+1)*pi/2)^2.  Robin(alpha) reduces to transcendental
    equations for mu solved by bisection to 1e-12:

    * i=0, alpha>0:  mu*tan(mu) = alpha on (0, pi/2),   lambda = mu^2
    * i=0, alpha<0:  mu*tanh(mu) = -alpha,              lambda = -mu^2
    * i=1, alpha>0:  mu = -alpha*tan(mu) on (pi/2, pi), lambda = mu^2
    * i=1, -1<alpha<0: mu = -alpha*tan(mu) on (0, pi/2), lambda = mu^2
    * i=1, alpha<-1: mu = -alpha*tanh(mu),              lambda = -mu^2

    with lambda_0 = 0 at alpha = 0 and lambda_1 = 0 at alpha = -1
    (linear eigenfunction).
    """
    if index not in (0, 1):
        raise ValueError("closed forms implemented for indices 0 and 1 only")
    if bc.is_dirichlet:
        return ((index + 1) * math.pi / 2) ** 2
    alpha = bc.alpha
    eps = 1e-15
    if index == 0:
        if alpha == 0.0:
            return 0.0
        if alpha > 0.0:
            mu = _bisect_root(lambda t: t * math.tan(t) - alpha,
                              eps, math.pi / 2 - eps)
            return mu * mu
        hi = max(1.0, -alpha) + 2.0
        mu = _bisect_root(lambda t: t * math.tanh(t) + alpha, eps, hi)
        return -mu * mu
    if alpha == 0.0:
        return (math.pi / 2) ** 2
    if alpha == -1.0:
        return 0.0
    if alpha > 0.0:
        mu = _bisect_root(lambda t: t + alpha * math.tan(t),
                          math.pi / 2 + eps, math.pi - eps)
        return mu * mu
    if alpha > -1.0:
        mu = _bisect_root(lambda t: t + alpha * math.tan(t),
                          1e-8, math.pi / 2 - eps)
        return mu * mu
    hi = max(1.0, -alpha) + 2.0
    mu = _bisect_root(lambda t: t + alpha * math.tanh(t), 1e-8, hi)
    return -mu * mu


def pi_p(p: float) -> float:
    """Half-period 2*pi/(p*sin(pi/p)) of the generalized sine."""
    return 2.0 * math.pi / (p * math.sin(math.pi / p))


def analytic_dirichlet_plaplace(p: float, index: int) -> float:
    """Closed-form Dirichlet p-Laplacian eigenvalues on (-1, 1):
    (p-1) * ((i+1)*pi_p/2)^p."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    return (p - 1.0) * ((index + 1) * pi_p(p) / 2.0) ** p


def zero_potential_problem(p: float, bc: BoundaryCondition) -> Problem:
    return Problem(p, constant(0.0), bc)
