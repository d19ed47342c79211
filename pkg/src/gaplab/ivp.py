"""Adaptive Dormand-Prince 5(4) integration with dense output.

Drives three clients: the general `integrate` entry point, the shooting
system for the p-Laplacian eigenvalue problem (with overflow-proof
renormalization and interior sign-change counting), and the Riccati
log-derivative equation (with a pole guard).

The stepper propagates the fifth-order solution, controls the embedded
4/5 error difference with a proportional-integral step-size law, and
interpolates with the pair's quartic dense-output polynomial.
"""

from __future__ import annotations

import bisect as _bisect
import math
from dataclasses import dataclass, field

from .problems import BoundaryCondition, Problem
from .potentials import as_callable

__all__ = [
    "StiffnessError", "Trajectory", "integrate",
    "ShotResult", "shoot_state", "RiccatiTrace", "riccati_integrate",
    "phi",
]

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (9017 / 3168, -355 / 33, 46732 / 5247,
                                49 / 176, -5103 / 18656)
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                                -17253 / 339200, 22 / 525, -1 / 40)

# dense-output matrix: y(t0 + th) = y0 + h * sum_s k_s * sum_j P[s][j] t^{j+1}
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0
_MIN_STEP_FRACTION = 1e-14
_MAX_STEPS = 2_000_000

RENORM_HIGH = 1e8   # rescale the shooting state above this magnitude
RENORM_LOW = 1e-4   # ... and below this one, to keep relative accuracy
POLE_GUARD = 1e6    # Riccati integration stops past this |v|


class StiffnessError(RuntimeError):
    """Step size underflow; carries the failure location in ``x``."""

    def __init__(self, x: float, message: str = ""):
        super().__init__(message or f"step size underflow near x={x}")
        self.x = x


def phi(s: float, e: float) -> float:
    """Odd power map sign(s)*|s|**e (e > 0)."""
    if s == 0.0:
        return 0.0
    return math.copysign(abs(s) ** e, s)


def _rk_step(f, t, y, k1, h):
    """One DP45 step from (t, y) with slope k1=f(t,y) already known.

    Returns (y_new, k_stages, err) with the seven stage slopes and the
    embedded error estimate (already scaled by h).
    """
    n = len(y)
    ys = [y[i] + h * _A21 * k1[i] for i in range(n)]
    k2 = f(t + _C2 * h, ys)
    ys = [y[i] + h * (_A31 * k1[i] + _A32 * k2[i]) for i in range(n)]
    k3 = f(t + _C3 * h, ys)
    ys = [y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i]) for i in range(n)]
    k4 = f(t + _C4 * h, ys)
    ys = [y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
          for i in range(n)]
    k5 = f(t + _C5 * h, ys)
    ys = [y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i]
                      + _A65 * k5[i]) for i in range(n)]
    k6 = f(t + h, ys)
    y_new = [y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i]
                         + _B6 * k6[i]) for i in range(n)]
    k7 = f(t + h, y_new)
    err = [h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                + _E6 * k6[i] + _E7 * k7[i]) for i in range(n)]
    return y_new, (k1, k2, k3, k4, k5, k6, k7), err


def _error_norm(err, y0, y1, rtol, atol):
    acc = 0.0
    for i in range(len(err)):
        sc = atol + rtol * max(abs(y0[i]), abs(y1[i]))
        q = err[i] / sc
        acc += q * q
    return math.sqrt(acc / len(err))


def _initial_step(f, t0, y0, f0, direction, rtol, atol, span):
    n = len(y0)
    w = [atol + rtol * abs(y0[i]) for i in range(n)]
    d0 = math.sqrt(sum((y0[i] / w[i]) ** 2 for i in range(n)) / n)
    d1 = math.sqrt(sum((f0[i] / w[i]) ** 2 for i in range(n)) / n)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = [y0[i] + h0 * direction * f0[i] for i in range(n)]
    f1 = f(t0 + h0 * direction, y1)
    d2 = math.sqrt(sum(((f1[i] - f0[i]) / w[i]) ** 2 for i in range(n)) / n) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


@dataclass
class _Step:
    """Accepted step with its dense interpolant.

    ``coeffs[i]`` are the quartic coefficients (theta^1..theta^4) of
    component i; ``log_scale`` is the renormalization exponent of the
    frame this step was computed in (0 outside the shooting driver).
    """

    t0: float
    h: float
    y0: tuple
    coeffs: tuple
    log_scale: float = 0.0

    def eval(self, t: float) -> list[float]:
        th = (t - self.t0) / self.h
        out = []
        for i in range(len(self.y0)):
            c1, c2, c3, c4 = self.coeffs[i]
            out.append(self.y0[i]
                       + th * (c1 + th * (c2 + th * (c3 + th * c4))))
        return out


def _dense_coeffs(k_stages, h, n):
    coeffs = []
    for i in range(n):
        c = [0.0, 0.0, 0.0, 0.0]
        for s in range(7):
            ksi = k_stages[s][i]
            if ksi == 0.0:
                continue
            prow = _P[s]
            c[0] += ksi * prow[0]
            c[1] += ksi * prow[1]
            c[2] += ksi * prow[2]
            c[3] += ksi * prow[3]
        coeffs.append((h * c[0], h * c[1], h * c[2], h * c[3]))
    return tuple(coeffs)


class Trajectory:
    """Piecewise-quartic dense output of an adaptive integration.

    Calling the trajectory at x returns the state vector; ``scale_at``
    returns the renormalization log-factor in force at x.
    """

    def __init__(self, steps: list[_Step], t0: float, t1: float):
        self.t0 = t0
        self.t1 = t1
        self._steps = sorted(steps, key=lambda s: min(s.t0, s.t0 + s.h))
        self._lefts = [min(s.t0, s.t0 + s.h) for s in self._steps]

    def _locate(self, t: float) -> _Step:
        lo, hi = min(self.t0, self.t1), max(self.t0, self.t1)
        if t < lo - 1e-12 or t > hi + 1e-12:
            raise ValueError(f"x={t} outside integrated range [{lo}, {hi}]")
        j = _bisect.bisect_right(self._lefts, t) - 1
        j = min(max(j, 0), len(self._steps) - 1)
        return self._steps[j]

    def __call__(self, t: float) -> list[float]:
        return self._locate(t).eval(t)

    def scale_at(self, t: float) -> float:
        return self._locate(t).log_scale

    @property
    def n_steps(self) -> int:
        return len(self._steps)


class _Stepper:
    """Adaptive DP45 stepping loop with PI step-size control."""

    def __init__(self, f, t0, t1, y0, rtol, atol, max_step=math.inf):
        self.f = f
        self.t = t0
        self.t_end = t1
        self.y = list(map(float, y0))
        self.rtol = rtol
        self.atol = atol
        self.direction = 1.0 if t1 >= t0 else -1.0
        self.span = abs(t1 - t0)
        self.max_step = max_step
        self.fy = f(t0, self.y)
        self.h = min(_initial_step(f, t0, self.y, self.fy, self.direction,
                                   rtol, atol, self.span), max_step)
        self.err_prev = 1e-4
        self.n_steps = 0
        self.done = self.span == 0.0

    def set_state(self, y):
        """Replace the state between steps (renormalization hook)."""
        self.y = list(y)
        self.fy = self.f(self.t, self.y)

    def step(self) -> _Step | None:
        if self.done:
            return None
        f = self.f
        h = self.h
        while True:
            self.n_steps += 1
            if self.n_steps > _MAX_STEPS:
                raise StiffnessError(self.t, f"step budget exhausted near x={self.t}")
            if h < _MIN_STEP_FRACTION * self.span:
                raise StiffnessError(self.t)
            remaining = abs(self.t_end - self.t)
            last = h >= remaining
            h_used = min(h, remaining, self.max_step)
            dt = self.direction * h_used
            y_new, ks, err = _rk_step(f, self.t, self.y, self.fy, dt)
            en = _error_norm(err, self.y, y_new, self.rtol, self.atol)
            if en <= 1.0 or h_used < _MIN_STEP_FRACTION * self.span * 2:
                break
            h = h_used * max(_MIN_FACTOR, _SAFETY * en ** -0.2)
        if en == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = _SAFETY * en ** -_PI_ALPHA * self.err_prev ** _PI_BETA
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        self.h = h_used * factor
        self.err_prev = max(en, 1e-10)
        rec = _Step(self.t, dt, tuple(self.y), _dense_coeffs(ks, dt, len(self.y)))
        self.t = self.t + dt if not last else self.t_end
        self.y = y_new
        self.fy = ks[6]  # FSAL
        if last:
            self.done = True
        return rec


def integrate(f, x0: float, x1: float, y0, tol: float,
              max_step: float = math.inf) -> Trajectory:
    """Integrate y' = f(x, y) from x0 to x1 with dense output.

    ``tol`` sets both the absolute and relative error targets.  Raises
    StiffnessError if the controller drives the step below 1e-14 of the
    interval length.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    stepper = _Stepper(f, x0, x1, y0, rtol=tol, atol=tol, max_step=max_step)
    steps = []
    while True:
        rec = stepper.step()
        if rec is None:
            break
        steps.append(rec)
    traj = Trajectory(steps, x0, x1)
    traj.y_end = stepper.y
    return traj


# ---------------------------------------------------------------------------
# shooting driver
# ---------------------------------------------------------------------------

@dataclass
class ShotResult:
    """Left-to-right shot across [-1, 1] at a trial eigenvalue.

    ``u_end`` and ``w_end`` are in the final renormalization frame; the
    true endpoint values carry the common positive factor
    exp(log_scale) on w (and on |u|^{p-2}u), i.e. exp(log_scale/(p-1))
    on u itself.  ``nodal_count`` counts strict interior sign changes
    of u; ``zero_brackets`` localizes each to one dense-output cell.
    """

    u_end: float
    w_end: float
    nodal_count: int
    log_scale: float
    trajectory: Trajectory
    p: float
    zero_brackets: list[tuple[float, float]] = field(default_factory=list)

    def state_at(self, x: float) -> tuple[float, float, float]:
        """(u, w, log_scale) at x, values in the frame at x."""
        y = self.trajectory(x)
        return y[0], y[1], self.trajectory.scale_at(x)

    def u_true(self, x: float) -> float:
        u, _w, ls = self.state_at(x)
        return u * math.exp(ls / (self.p - 1.0))


def _shooting_field(problem: Problem, lam: float):
    v = as_callable(problem.potential)
    p = problem.p
    if p == 2.0:
        def f2(x, y):
            return [y[1], (v(x) - lam) * y[0]]
        return f2
    ep = p - 1.0          # exponent for Phi_p
    eq = 1.0 / (p - 1.0)  # exponent for Phi_{p'}

    def fp(x, y):
        u, w = y
        du = math.copysign(abs(w) ** eq, w) if w != 0.0 else 0.0
        dw = (v(x) - lam) * (math.copysign(abs(u) ** ep, u) if u != 0.0 else 0.0)
        return [du, dw]

    return fp


def initial_state(bc: BoundaryCondition) -> tuple[float, float]:
    """Left-endpoint seed: Robin(alpha) -> (1, alpha); Dirichlet -> (0, 1)."""
    if bc.is_dirichlet:
        return 0.0, 1.0
    return 1.0, float(bc.alpha)


def shoot_state(problem: Problem, lam: float, rtol: float = 1e-11,
                seed: tuple[float, float] | None = None) -> ShotResult:
    """Integrate the first-order system u' = Phi_{p'}(w), w' = (V-lam)Phi_p(u)
    from x=-1 to x=1.

    The state is renormalized by its p-homogeneity whenever
    max(|u|, |w|^{1/(p-1)}) leaves [RENORM_LOW, RENORM_HIGH]; the
    accumulated factor is returned as ``log_scale``.  Interior sign
    changes of u are counted from dense-output samples.
    """
    p = problem.p
    f = _shooting_field(problem, lam)
    y0 = initial_state(problem.bc) if seed is None else tuple(map(float, seed))
    stepper = _Stepper(f, -1.0, 1.0, y0, rtol=rtol, atol=rtol * 1e-8)
    steps: list[_Step] = []
    log_scale = 0.0
    count = 0
    brackets: list[tuple[float, float]] = []
    last_sign = 0 if y0[0] == 0.0 else (1 if y0[0] > 0 else -1)
    last_x = -1.0
    wexp = 1.0 / (p - 1.0)
    while True:
        rec = stepper.step()
        if rec is None:
            break
        rec.log_scale = log_scale
        steps.append(rec)
        # sign changes of u, sampled inside the step and at its end; a
        # flip seen at a sample with u != 0 places the zero strictly
        # before that sample, so every counted crossing is interior
        for th in (0.25, 0.5, 0.75, 1.0):
            x = rec.t0 + th * rec.h
            c1, c2, c3, c4 = rec.coeffs[0]
            u = rec.y0[0] + th * (c1 + th * (c2 + th * (c3 + th * c4)))
            sg = 0 if u == 0.0 else (1 if u > 0.0 else -1)
            if sg != 0:
                if last_sign != 0 and sg != last_sign:
                    count += 1
                    brackets.append((last_x, x))
                last_sign = sg
                last_x = x
        # renormalization by degree homogeneity
        u, w = stepper.y
        m = max(abs(u), abs(w) ** wexp)
        if m > 0.0 and not (RENORM_LOW <= m <= RENORM_HIGH):
            s = m
            log_scale += (p - 1.0) * math.log(s)
            stepper.set_state([u / s, w / s ** (p - 1.0)])
    traj = Trajectory(steps, -1.0, 1.0)
    u_end, w_end = stepper.y
    return ShotResult(u_end, w_end, count, log_scale, traj, p, brackets)


# ---------------------------------------------------------------------------
# Riccati log-derivative
# ---------------------------------------------------------------------------

@dataclass
class RiccatiTrace:
    """Samples of v along the integrated stretch, and the first abscissa
    (if any) where |v| broke the pole guard."""

    samples: list[tuple[float, float]]
    blow_up: float | None


def riccati_integrate(problem: Problem, lam: float, x_from: float, x_to: float,
                      v0: float, rtol: float = 1e-10) -> RiccatiTrace:
    """Integrate v' = (V - lam) - (p-1)|v|^{p/(p-1)} from (x_from, v0)
    toward x_to (either direction), stopping at the pole guard.

    v has a pole at every zero of the underlying eigenfunction, so the
    trace ends early whenever |v| exceeds POLE_GUARD.
    """
    if not (-1.0 <= min(x_from, x_to) and max(x_from, x_to) <= 1.0):
        raise ValueError("Riccati integration range must lie inside [-1, 1]")
    if x_from == x_to:
        raise ValueError("empty integration range")
    p = problem.p
    v = as_callable(problem.potential)
    ee = p / (p - 1.0)
    pm1 = p - 1.0

    def f(x, y):
        return [(v(x) - lam) - pm1 * abs(y[0]) ** ee]

    stepper = _Stepper(f, x_from, x_to, [v0], rtol=rtol, atol=rtol,
                       max_step=abs(x_to - x_from) / 8)
    samples = [(x_from, float(v0))]
    blow_up = None
    while True:
        try:
            rec = stepper.step()
        except StiffnessError as exc:
            blow_up = exc.x
            break
        if rec is None:
            break
        samples.append((stepper.t, stepper.y[0]))
        if abs(stepper.y[0]) > POLE_GUARD:
            blow_up = stepper.t
            break
    return RiccatiTrace(samples, blow_up)
