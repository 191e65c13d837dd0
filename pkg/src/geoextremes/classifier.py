"""Geometric classification of extremal dependence.

The limit set touches the boundary ``{max(x, y) = 1}`` where the boundary
functions ``k(q) = g(1, q)`` and ``k̃(q) = g(q, 1)`` equal one on
``[0, 1]``. The classifier inspects those contacts:

* ``k(1) > 1``: ``(1, 1)`` is outside the limit set (blunt), so AI.
* A contact along a segment of positive length (flat), so AI.
* A contact with a zero one-sided slope, i.e. a vertical or horizontal
  tangent along the boundary, so AI.
* An angular density that explodes at the axes while ``k(0) = 1``, so AI.
  This check only runs when the caller supplies a density.
* Otherwise the limit set is pointy, so AD, and χ is bracketed by ratios
  of ``b(q)/k'(q±)`` sums over the contacts.

Contacts approached by a decreasing ``k`` form the set A. Contacts left
by an increasing ``k`` form the set B. Weights ``b`` default to a constant.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .gauges import BoundaryFunctions, Gauge, boundary_profile

__all__ = [
    "Contact",
    "FlatSegment",
    "IntersectionSet",
    "DependenceClass",
    "find_intersections",
    "chi_bounds",
    "classify",
    "endpoint_power",
]

TOL_LEVEL = 1e-4
TOL_DERIV = 1e-2
FLAT_TOL = 1e-8
MIN_FLAT_CELLS = 3
SIDES = ("k", "k_tilde")


@dataclass(frozen=True)
class Contact:
    """Isolated contact of a boundary function with the unit level.

    ``membership`` lists ``"A"`` when k decreases into the point and
    ``"B"`` when it increases out of it (within ``[0, 1]``).
    """

    side: str
    q: float
    value: float
    d_minus: Optional[float]
    d_plus: Optional[float]
    membership: tuple

    def to_dict(self) -> dict:
        out = asdict(self)
        out["membership"] = list(self.membership)
        return out


@dataclass(frozen=True)
class FlatSegment:
    """Interval of q on which a boundary function equals one."""

    side: str
    q_lo: float
    q_hi: float

    def to_dict(self) -> dict:
        return {"side": self.side, "q_lo": self.q_lo, "q_hi": self.q_hi, "membership": ["flat"]}


@dataclass(frozen=True)
class IntersectionSet:
    """All unit-level contacts of ``k`` and ``k̃`` on ``[0, 1]``."""

    contacts: tuple
    flats: tuple
    k_at_one: float
    k_tilde_at_one: float
    d_plus_at_one: dict = field(default_factory=dict)

    def on(self, side: str):
        return [c for c in self.contacts if c.side == side]

    def flats_on(self, side: str):
        return [f for f in self.flats if f.side == side]

    def to_list(self) -> list:
        return [c.to_dict() for c in self.contacts] + [f.to_dict() for f in self.flats]


@dataclass(frozen=True)
class DependenceClass:
    """Classification verdict with χ bounds for AD."""

    label: str
    mechanism: str
    intersections: IntersectionSet
    chi_lower: Optional[float] = None
    chi_upper: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "mechanism": self.mechanism,
            "intersections": self.intersections.to_list(),
            "chi_lower": self.chi_lower,
            "chi_upper": self.chi_upper,
        }


# ---------------------------------------------------------------------------
# contact detection


def _runs(mask):
    """(start, stop) index pairs of the True runs of a boolean array."""
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(edges[::2], edges[1::2]))


def _refine_min(f, grid, j):
    """Refine a grid minimiser of `f` inside its neighbouring cells."""
    q = float(grid[j])
    if j == 0 or q >= 1.0:
        return q
    lo, hi = float(grid[j - 1]), min(float(grid[j + 1]), 1.0)
    res = minimize_scalar(lambda t: float(f(t)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    if res.fun < float(f(q)):
        q = float(res.x)
    # snap contacts that sit on the interval ends
    if q < 1e-9:
        q = 0.0
    if q > 1.0 - 1e-9:
        q = 1.0
    return q


def find_intersections(profile: BoundaryFunctions, tol_level: float = TOL_LEVEL,
                       tol_deriv: float = TOL_DERIV, flat_tol: float = FLAT_TOL,
                       min_flat_cells: int = MIN_FLAT_CELLS) -> IntersectionSet:
    """Locate unit-level contacts of ``k`` and ``k̃`` on ``[0, 1]``.

    Grid points with ``k(q) <= 1 + tol_level`` are merged into runs. A run
    containing at least `min_flat_cells` consecutive cells with
    ``|k - 1| <= flat_tol`` is a flat segment. Every other run yields one
    contact at its refined minimiser, carrying one-sided three-point
    finite-difference derivatives.

    Parameters
    ----------
    profile : BoundaryFunctions
        Output of :func:`boundary_profile`; the grid must contain 0 and 1.
    tol_level : float
        Level tolerance for being "at one".
    tol_deriv : float
        Unused for detection. It is kept in the signature so callers can
        pass the classifier tolerances through unchanged.
    flat_tol : float
        Equality tolerance used for flat-segment cells.
    min_flat_cells : int
        Minimum number of grid cells for a flat segment.
    """
    grid = profile.grid
    if not (np.any(grid == 0.0) and np.any(grid == 1.0)):
        raise ValueError("the profile grid must contain q = 0 and q = 1")
    unit = grid <= 1.0
    qg = grid[unit]
    contacts, flats = [], []
    d_plus_one = {}
    h = profile.step
    for side in SIDES:
        vals = profile.values(side)[unit]
        f = profile.function(side)
        d_plus_one[side] = profile.derivative(1.0, "+", side)
        for start, stop in _runs(vals <= 1.0 + tol_level):
            seg = vals[start:stop]
            exact = np.abs(seg - 1.0) <= flat_tol
            flat_runs = [(a, b) for a, b in _runs(exact) if b - a - 1 >= min_flat_cells]
            if flat_runs:
                for a, b in flat_runs:
                    flats.append(FlatSegment(side, float(qg[start + a]), float(qg[start + b - 1])))
                continue
            j = start + int(np.argmin(seg))
            q = _refine_min(f, qg, j)
            d_minus = profile.derivative(q, "-", side) if q >= 2 * h else None
            d_plus = profile.derivative(q, "+", side)
            member = []
            if d_minus is not None and q > 0.0 and d_minus <= 0.0:
                member.append("A")
            if q < 1.0 and d_plus >= 0.0:
                member.append("B")
            contacts.append(Contact(side, q, float(f(q)), d_minus, d_plus, tuple(member)))
    return IntersectionSet(tuple(contacts), tuple(flats),
                           float(profile.k(1.0)), float(profile.k_tilde(1.0)), d_plus_one)


# ---------------------------------------------------------------------------
# χ bounds


def _weight(b, q):
    if b is None:
        return 1.0
    if callable(b):
        return float(b(q))
    return float(b.get(q, b.get(round(q, 12), 1.0)))


def _denominator(inter: IntersectionSet, side: str, b) -> float:
    total = 0.0
    for c in inter.on(side):
        if "A" in c.membership:
            if c.d_minus == 0.0:
                raise ZeroDivisionError(f"zero left derivative at q={c.q}: a tangent contact")
            total -= _weight(b, c.q) / c.d_minus
        if "B" in c.membership:
            if c.d_plus == 0.0:
                raise ZeroDivisionError(f"zero right derivative at q={c.q}: a tangent contact")
            total += _weight(b, c.q) / c.d_plus
    return total + _weight(b, 1.0) / inter.d_plus_at_one[side]


def chi_bounds(intersections: IntersectionSet, b=None, b_tilde=None):
    """Bounds on χ for a pointy limit set.

    Parameters
    ----------
    intersections : IntersectionSet
        Contacts of a pointy limit set.
    b, b_tilde : callable or mapping, optional
        Weights ``b(q)`` and ``b̃(q)`` at the contacts. Both default to a
        constant, in which case the bounds coincide for symmetric gauges.

    Returns
    -------
    chi_lower, chi_upper : float

    Examples
    --------
    For the logistic gauge the two bounds equal ``(2 - 2γ)/(2 - γ)``.
    """
    if intersections.flats:
        raise ValueError("flat contacts present: the limit set is not pointy")
    num = (_weight(b, 1.0) / intersections.d_plus_at_one["k"]
           + _weight(b_tilde, 1.0) / intersections.d_plus_at_one["k_tilde"])
    den_k = _denominator(intersections, "k", b)
    den_kt = _denominator(intersections, "k_tilde", b_tilde)
    lower = num / max(den_k, den_kt)
    upper = num / min(den_k, den_kt)
    return float(lower), float(min(upper, 1.0))


# ---------------------------------------------------------------------------
# classification


def endpoint_power(density: Callable, end: int, eps=(1e-3, 1e-4)) -> float:
    """Local power exponent of `density` at ``w = end`` (0 or 1).

    Returns ρ in ``density(w) ≈ c |w - end|^ρ`` from two distances; a
    negative value means the density diverges at the endpoint.
    """
    e1, e2 = eps
    w1, w2 = (e1, e2) if end == 0 else (1.0 - e1, 1.0 - e2)
    f1, f2 = float(density(w1)), float(density(w2))
    if f1 <= 0 or f2 <= 0:
        return math.inf
    return math.log(f1 / f2) / math.log(e1 / e2)


def classify(g: Gauge, tol_level: float = TOL_LEVEL, tol_deriv: float = TOL_DERIV,
             grid=None, angular_density: Optional[Callable] = None,
             divergence_power: float = 0.05, b=None, b_tilde=None) -> DependenceClass:
    """Classify a normalised gauge as asymptotically dependent or independent.

    Parameters
    ----------
    g : Gauge
        Gauge with coordinatewise supremum ``(1, 1)``.
    tol_level, tol_deriv : float
        Level tolerance for contacts and the slope below which a contact
        counts as a tangent.
    grid : array_like, optional
        q grid for the boundary profile.
    angular_density : callable, optional
        Estimate of the angular density ``f_W(w)``. When given and the
        limit set touches both axes, a power-law blow-up at both
        endpoints with exponent in ``(-1, -divergence_power)`` yields
        AI with mechanism ``"diverging-b"``.
    b, b_tilde : callable or mapping, optional
        Weights for :func:`chi_bounds`.

    Returns
    -------
    DependenceClass
    """
    profile = boundary_profile(g, grid)
    inter = find_intersections(profile, tol_level, tol_deriv)
    if inter.k_at_one > 1.0 + tol_level or inter.k_tilde_at_one > 1.0 + tol_level:
        return DependenceClass("AI", "blunt", inter)
    if inter.flats:
        return DependenceClass("AI", "flat-segment", inter)
    for c in inter.contacts:
        if ("A" in c.membership and abs(c.d_minus) < tol_deriv) or \
                ("B" in c.membership and abs(c.d_plus) < tol_deriv):
            return DependenceClass("AI", "tangent", inter)
    if angular_density is not None:
        at_axis = {s: any(c.q == 0.0 for c in inter.on(s)) for s in SIDES}
        if at_axis["k"] and at_axis["k_tilde"]:
            # k(0) = 1 is tied to f_W at w = 1, k̃(0) = 1 to w = 0
            p1 = endpoint_power(angular_density, 1)
            p0 = endpoint_power(angular_density, 0)
            if all(-1.0 < p < -divergence_power for p in (p0, p1)):
                return DependenceClass("AI", "diverging-b", inter)
    lo, hi = chi_bounds(inter, b, b_tilde)
    return DependenceClass("AD", "pointy", inter, lo, hi)
