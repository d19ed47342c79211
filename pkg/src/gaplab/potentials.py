"""Potentials V on the interval [-1, 1]: parsing, evaluation, classification.

A potential is an immutable descriptor of one of five kinds:

* ``constant``    -- V(x) = c
* ``linear``      -- V(x) = a*x
* ``polynomial``  -- V(x) = c0 + c1*x + ... + cd*x^d
* ``abs_scaled``  -- V(x) = c*|x|
* ``sampled``     -- piecewise-linear interpolation of (x, value) nodes

The text grammar is ``const:<c> | linear:<a> | poly:<c0>,<c1>,... |
abs:<c> | samples:<path>`` where ``<path>`` names a two-column CSV file.
"""

from __future__ import annotations

import bisect
import csv
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

KINDS = ("constant", "linear", "polynomial", "abs_scaled", "sampled")

# Property tolerances: interpolation noise dominates for sampled data.
TOL_ANALYTIC = 1e-10
TOL_SAMPLED = 1e-8

_COEFF_EPS = 1e-14  # below this a polynomial coefficient counts as zero


class PotentialError(ValueError):
    """Malformed potential spec or invalid sample data."""


class PotentialDomainError(ValueError):
    """Evaluation point outside [-1, 1]."""


@dataclass(frozen=True)
class Potential:
    kind: str
    params: tuple[float, ...] = ()
    nodes: tuple[float, ...] = ()   # sampled kind only, strictly increasing
    values: tuple[float, ...] = ()  # sampled kind only
    label: str = field(default="", compare=False)
    source: str = field(default="", compare=False)  # CSV path for sampled

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PotentialError(f"unknown potential kind {self.kind!r}")
        if self.kind == "sampled":
            xs = self.nodes
            if len(xs) < 2 or len(xs) != len(self.values):
                raise PotentialError("sampled potential needs matched x/value lists")
            if any(b - a <= 0 for a, b in zip(xs, xs[1:])):
                raise PotentialError("sample abscissae must be strictly increasing")
            if abs(xs[0] + 1.0) > 1e-12 or abs(xs[-1] - 1.0) > 1e-12:
                raise PotentialError("sample abscissae must start at -1 and end at 1")
        if not all(np.isfinite(self.params)):
            raise PotentialError("potential coefficients must be finite")
        if not all(np.isfinite(self.values)):
            raise PotentialError("sample values must be finite")


@dataclass(frozen=True)
class PropertyFlags:
    """Shape properties of a potential on [-1, 1].

    ``well_point`` is the split abscissa x0 for single-well potentials
    (non-increasing left of x0, non-decreasing right of it); monotone
    potentials report the appropriate endpoint.
    """

    symmetric: bool
    single_well: bool
    well_point: float | None
    convex: bool
    affine: bool

    def __post_init__(self):
        if self.affine and not self.convex:
            raise ValueError("affine potentials are convex by definition")


# ---------------------------------------------------------------------------
# construction and parsing
# ---------------------------------------------------------------------------

def constant(c: float, label: str = "") -> Potential:
    return Potential("constant", (float(c),), label=label)


def linear(a: float, label: str = "") -> Potential:
    return Potential("linear", (float(a),), label=label)


def polynomial(coeffs: Sequence[float], label: str = "") -> Potential:
    if len(coeffs) == 0:
        raise PotentialError("polynomial needs at least one coefficient")
    return Potential("polynomial", tuple(float(c) for c in coeffs), label=label)


def abs_scaled(c: float, label: str = "") -> Potential:
    return Potential("abs_scaled", (float(c),), label=label)


def sampled(xs: Sequence[float], vs: Sequence[float], label: str = "",
            source: str = "") -> Potential:
    return Potential("sampled", (), tuple(float(x) for x in xs),
                     tuple(float(v) for v in vs), label=label, source=source)


def load_samples_csv(path: str) -> Potential:
    """Read a two-column (x, value) CSV; a non-numeric first row is a header."""
    xs: list[float] = []
    vs: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise PotentialError(f"{path}: expected two columns, got {row!r}")
            try:
                x, v = float(row[0]), float(row[1])
            except ValueError:
                if not xs:  # header row
                    continue
                raise PotentialError(f"{path}: non-numeric row {row!r}")
            xs.append(x)
            vs.append(v)
    if len(xs) < 2:
        raise PotentialError(f"{path}: need at least two sample rows")
    return sampled(xs, vs, source=path)


def _parse_float(token: str, spec: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise PotentialError(f"bad number {token!r} in potential spec {spec!r}")


def parse_potential(spec: str) -> Potential:
    """Parse the ``kind:args`` grammar into a Potential."""
    head, sep, rest = spec.partition(":")
    if not sep:
        raise PotentialError(f"expected 'kind:args', got {spec!r}")
    head = head.strip()
    if head == "const":
        return constant(_parse_float(rest, spec))
    if head == "linear":
        return linear(_parse_float(rest, spec))
    if head == "abs":
        return abs_scaled(_parse_float(rest, spec))
    if head == "poly":
        coeffs = [_parse_float(tok, spec) for tok in rest.split(",") if True]
        return polynomial(coeffs)
    if head == "samples":
        return load_samples_csv(rest)
    raise PotentialError(f"unknown potential kind {head!r} in {spec!r}")


def serialize_potential(p: Potential) -> str:
    """Canonical text form; parse(serialize(.)) is the identity."""
    if p.kind == "constant":
        return f"const:{p.params[0]!r}"
    if p.kind == "linear":
        return f"linear:{p.params[0]!r}"
    if p.kind == "abs_scaled":
        return f"abs:{p.params[0]!r}"
    if p.kind == "polynomial":
        return "poly:" + ",".join(repr(c) for c in p.params)
    if p.source:
        return f"samples:{p.source}"
    raise PotentialError("sampled potential without a source path has no text form")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _check_domain(x: float) -> float:
    if x < -1.0 - 1e-12 or x > 1.0 + 1e-12:
        raise PotentialDomainError(f"x={x} outside [-1, 1]")
    return min(1.0, max(-1.0, x))


def eval_potential(p: Potential, x: float) -> float:
    """V(x) for a single point x in [-1, 1]."""
    x = _check_domain(float(x))
    return as_callable(p)(x)


def as_callable(p: Potential) -> Callable[[float], float]:
    """Fast scalar closure for integrator inner loops (no domain checks)."""
    if p.kind == "constant":
        c = p.params[0]
        return lambda x: c
    if p.kind == "linear":
        a = p.params[0]
        return lambda x: a * x
    if p.kind == "abs_scaled":
        c = p.params[0]
        return lambda x: c * abs(x)
    if p.kind == "polynomial":
        rev = tuple(reversed(p.params))

        def _horner(x: float, _rev=rev) -> float:
            acc = 0.0
            for c in _rev:
                acc = acc * x + c
            return acc

        return _horner
    xs, vs = p.nodes, p.values

    def _interp(x: float) -> float:
        j = bisect.bisect_right(xs, x) - 1
        j = min(max(j, 0), len(xs) - 2)
        t = (x - xs[j]) / (xs[j + 1] - xs[j])
        return vs[j] + t * (vs[j + 1] - vs[j])

    return _interp


def potential_values(p: Potential, xs: np.ndarray) -> np.ndarray:
    """Vectorized V on an array of points (no domain checks)."""
    xs = np.asarray(xs, dtype=float)
    if p.kind == "constant":
        return np.full_like(xs, p.params[0])
    if p.kind == "linear":
        return p.params[0] * xs
    if p.kind == "abs_scaled":
        return p.params[0] * np.abs(xs)
    if p.kind == "polynomial":
        return np.polyval(list(reversed(p.params)), xs)
    return np.interp(xs, p.nodes, p.values)


# ---------------------------------------------------------------------------
# algebra on analytic kinds
# ---------------------------------------------------------------------------

def _poly_coeffs(p: Potential) -> tuple[float, ...]:
    if p.kind == "constant":
        return (p.params[0],)
    if p.kind == "linear":
        return (0.0, p.params[0])
    if p.kind == "polynomial":
        return p.params
    raise PotentialError(f"{p.kind} potential is not polynomial-representable")


def scale_potential(p: Potential, t: float) -> Potential:
    """t*V, staying within the same kind."""
    t = float(t)
    if p.kind == "sampled":
        return sampled(p.nodes, tuple(t * v for v in p.values))
    return Potential(p.kind, tuple(t * c for c in p.params))


def add_potentials(p: Potential, q: Potential) -> Potential:
    """V + W for polynomial-representable kinds (or two abs/sampled of one shape)."""
    if p.kind == "abs_scaled" and q.kind == "abs_scaled":
        return abs_scaled(p.params[0] + q.params[0])
    if p.kind == "sampled" and q.kind == "sampled" and p.nodes == q.nodes:
        return sampled(p.nodes, tuple(a + b for a, b in zip(p.values, q.values)))
    a, b = _poly_coeffs(p), _poly_coeffs(q)
    n = max(len(a), len(b))
    coeffs = tuple((a[i] if i < len(a) else 0.0) + (b[i] if i < len(b) else 0.0)
                   for i in range(n))
    return polynomial(coeffs)


def reflect_potential(p: Potential) -> Potential:
    """The reflected potential x -> V(-x)."""
    if p.kind in ("constant", "abs_scaled"):
        return Potential(p.kind, p.params)
    if p.kind == "linear":
        return linear(-p.params[0])
    if p.kind == "polynomial":
        return polynomial(tuple(c if i % 2 == 0 else -c
                                for i, c in enumerate(p.params)))
    return sampled(tuple(-x for x in reversed(p.nodes)),
                   tuple(reversed(p.values)))


def secant_line(p: Potential, xi_minus: float, xi_plus: float) -> tuple[float, float]:
    """Coefficients (a, b) of the chord a*x+b through (xi-, V(xi-)) and (xi+, V(xi+))."""
    if not (-1.0 - 1e-12 <= xi_minus < xi_plus <= 1.0 + 1e-12):
        if xi_minus >= xi_plus:
            raise PotentialError(f"degenerate chord: xi-={xi_minus} >= xi+={xi_plus}")
        raise PotentialDomainError(f"chord points ({xi_minus}, {xi_plus}) outside [-1, 1]")
    v_m = eval_potential(p, xi_minus)
    v_p = eval_potential(p, xi_plus)
    a = (v_p - v_m) / (xi_plus - xi_minus)
    b = v_m - a * xi_minus
    return a, b


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def _single_well_split(vals: np.ndarray, tol: float) -> tuple[bool, int]:
    k = int(np.argmin(vals))
    pre = np.diff(vals[: k + 1])
    post = np.diff(vals[k:])
    ok = bool(np.all(pre <= tol) and np.all(post >= -tol))
    return ok, k


def classify_potential(p: Potential, n: int = 513) -> PropertyFlags:
    """Decide symmetric / single-well / convex / affine.

    Analytic kinds use exact coefficient and derivative tests where
    available; the single-well split and sampled-kind tests run on a
    size-``n`` grid (or the sample nodes themselves).
    """
    if n < 3:
        raise ValueError("classification grid needs n >= 3")

    if p.kind == "constant":
        return PropertyFlags(True, True, 0.0, True, True)

    if p.kind == "linear":
        a = p.params[0]
        if a == 0.0:
            return PropertyFlags(True, True, 0.0, True, True)
        x0 = -1.0 if a > 0 else 1.0
        return PropertyFlags(False, True, x0, True, True)

    if p.kind == "abs_scaled":
        c = p.params[0]
        if c == 0.0:
            return PropertyFlags(True, True, 0.0, True, True)
        if c > 0:
            return PropertyFlags(True, True, 0.0, True, False)
        # a hill: rises then falls, so not single-well
        return PropertyFlags(True, False, None, False, False)

    if p.kind == "polynomial":
        coeffs = np.asarray(p.params, dtype=float)
        scale = max(1.0, float(np.max(np.abs(coeffs))))
        deg = len(coeffs) - 1
        while deg > 0 and abs(coeffs[deg]) <= _COEFF_EPS * scale:
            deg -= 1
        coeffs = coeffs[: deg + 1]
        symmetric = bool(all(abs(c) <= TOL_ANALYTIC * scale for c in coeffs[1::2]))
        affine = deg <= 1
        grid = np.linspace(-1.0, 1.0, n)
        if deg <= 1:
            convex = True
        else:
            d2 = np.polynomial.polynomial.polyder(coeffs, 2)
            convex = bool(np.min(np.polynomial.polynomial.polyval(grid, d2))
                          >= -TOL_ANALYTIC * scale)
        if deg == 1:
            return PropertyFlags(symmetric, True, -1.0 if coeffs[1] > 0 else 1.0,
                                 convex, affine)
        vals = potential_values(p, grid)
        well, k = _single_well_split(vals, TOL_ANALYTIC * scale)
        return PropertyFlags(symmetric, well, float(grid[k]) if well else None,
                             convex, affine)

    # sampled: test on the nodes themselves to avoid interpolation artifacts
    xs = np.asarray(p.nodes)
    vs = np.asarray(p.values)
    tol = TOL_SAMPLED * max(1.0, float(np.max(np.abs(vs))))
    symmetric = bool(np.max(np.abs(potential_values(p, -xs) - vs)) <= tol)
    well, k = _single_well_split(vs, tol)
    slopes = np.diff(vs) / np.diff(xs)
    dd = np.diff(slopes) / (xs[2:] - xs[:-2])
    convex = bool(np.all(dd >= -tol))
    affine = bool(np.all(np.abs(dd) <= tol))
    return PropertyFlags(symmetric, well, float(xs[k]) if well else None,
                         convex, affine)


# ---------------------------------------------------------------------------
# seeded test families
# ---------------------------------------------------------------------------

def random_family(kind: str, seed: int, count: int,
                  amplitude: float = 10.0) -> list[Potential]:
    """Deterministic corpus of potentials with the requested shape.

    ``kind`` is ``symmetric_single_well`` or ``convex``; every returned
    potential classifies accordingly (convex ones are never affine).
    Coefficients are bounded by ``amplitude``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if kind not in ("symmetric_single_well", "convex"):
        raise ValueError(f"unknown family kind {kind!r}")
    rng = random.Random(f"{kind}:{seed}")
    out: list[Potential] = []
    for j in range(count):
        amp = rng.uniform(0.5, amplitude)
        if kind == "symmetric_single_well":
            shape = rng.randrange(3)
            if shape == 0:
                p = abs_scaled(amp, label=f"ssw{seed}.{j}")
            elif shape == 1:
                # flat-bottomed vee c*max(|x|, s): exact as piecewise-linear data
                s = rng.uniform(0.1, 0.8)
                p = sampled((-1.0, -s, s, 1.0),
                            (amp, amp * s, amp * s, amp),
                            label=f"ssw{seed}.{j}")
            else:
                w2 = rng.uniform(0.0, 1.0)
                w4 = rng.uniform(0.0, 1.0)
                total = w2 + w4
                if total == 0.0:
                    w2 = 1.0
                    total = 1.0
                p = polynomial((rng.uniform(-2.0, 2.0), 0.0, amp * w2 / total,
                                0.0, amp * w4 / total), label=f"ssw{seed}.{j}")
        else:
            shape = rng.randrange(3)
            tilt = rng.uniform(-0.3 * amplitude, 0.3 * amplitude)
            if shape == 0:
                # sum of squares of linear factors, plus an affine tilt
                a1, b1 = rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)
                a2, b2 = rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)
                lead = max(a1 * a1 + a2 * a2, 0.05)
                scl = amp / max(lead, 1.0)
                p = polynomial((scl * (b1 * b1 + b2 * b2),
                                scl * 2.0 * (a1 * b1 + a2 * b2) + tilt,
                                scl * lead), label=f"cvx{seed}.{j}")
            elif shape == 1:
                # shifted vee c*|x - s|: convex, kinked, not affine
                s = rng.uniform(-0.7, 0.7)
                p = sampled((-1.0, s, 1.0),
                            (amp * (1.0 + s), 0.0, amp * (1.0 - s)),
                            label=f"cvx{seed}.{j}")
            else:
                c2 = rng.uniform(0.1, 0.5) * amp
                c4 = rng.uniform(0.0, 0.5) * amp
                p = polynomial((rng.uniform(-2.0, 2.0), tilt, c2, 0.0, c4),
                               label=f"cvx{seed}.{j}")
        out.append(p)
    return out
