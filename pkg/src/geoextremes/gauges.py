"""Gauge functions on the positive quadrant.

A gauge is a non-negative function on ``[0, inf)^2`` that is homogeneous
of order one. Its unit sub-level set ``G = {g <= 1}`` is the limit set of
a suitably scaled sample cloud with exponential margins, so a valid gauge
also satisfies ``g(x, y) >= max(x, y)`` (the coordinatewise supremum of
``G`` is ``(1, 1)``).

The module provides the parametric base families, a pointwise-minimum
combinator, boundary profiles ``k(q) = g(1, q)`` and ``k̃(q) = g(q, 1)``
with one-sided finite-difference derivatives, and unit level-set export.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from typing import Callable, ClassVar

import numpy as np

__all__ = [
    "Gauge",
    "Logistic",
    "Gaussian",
    "InvertedLogistic",
    "Rectangular",
    "MaxMin",
    "PointwiseMin",
    "eval_logistic",
    "eval_gaussian",
    "eval_inverted_logistic",
    "eval_rectangular",
    "eval_maxmin",
    "BoundaryFunctions",
    "boundary_profile",
    "default_q_grid",
    "one_sided_derivative",
    "level_set",
    "write_level_set_csv",
]

FD_STEP = 1e-5
Q_MAX = 5.0


# ---------------------------------------------------------------------------
# input handling


def _prepare(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("gauge functions are defined on the non-negative quadrant only")
    if np.any(np.isnan(x)) or np.any(np.isnan(y)):
        raise ValueError("gauge arguments must not be NaN")
    return x, y


def _ret(v):
    return float(v) if np.ndim(v) == 0 else v


def _check_open_unit(name, v):
    if not 0.0 < v < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {v}")


def _check_half_open_unit(name, v):
    if not 0.0 < v <= 1.0:
        raise ValueError(f"{name} must lie in (0, 1], got {v}")


# ---------------------------------------------------------------------------
# raw family formulas


def _logistic(x, y, gamma):
    mx, mn = np.maximum(x, y), np.minimum(x, y)
    return mx / gamma + (1.0 - 1.0 / gamma) * mn


def _gaussian(x, y, rho):
    return (x + y - 2.0 * rho * np.sqrt(x) * np.sqrt(y)) / (1.0 - rho * rho)


def _inverted_logistic(x, y, theta):
    if theta == 1.0:
        return x + y
    # (x^{1/θ} + y^{1/θ})^θ = M (1 + (m/M)^{1/θ})^θ, with the ratio power
    # taken in log space so tiny θ neither overflows nor underflows badly
    mx, mn = np.maximum(x, y), np.minimum(x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mx > 0, mn / np.where(mx > 0, mx, 1.0), 0.0)
        pw = np.where(ratio > 0, np.exp(np.log(np.where(ratio > 0, ratio, 1.0)) / theta), 0.0)
    return mx * np.exp(theta * np.log1p(pw))


def _rectangular(x, y, theta):
    d = np.abs(x - y) / theta
    return np.maximum(d, (x + y) / (2.0 - theta))


def _maxmin(x, y, theta):
    mx, mn = np.maximum(x, y), np.minimum(x, y)
    if theta < 1.0:
        return mx / theta + (1.0 - 1.0 / theta) * mn
    return mx + (1.0 - 1.0 / theta) * mn


def eval_logistic(x, y, gamma):
    """Logistic gauge ``(x + y)/γ + (1 - 2/γ) min(x, y)``.

    Parameters
    ----------
    x, y : float or array_like
        Non-negative coordinates.
    gamma : float
        Dependence parameter in (0, 1); smaller is stronger dependence.

    Examples
    --------
    >>> eval_logistic(2.0, 1.0, 0.5)
    3.0
    """
    _check_open_unit("gamma", gamma)
    x, y = _prepare(x, y)
    return _ret(_logistic(x, y, gamma))


def eval_gaussian(x, y, rho):
    """Gaussian gauge ``(x + y - 2ρ√(xy)) / (1 - ρ²)`` for ρ in [0, 1)."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    x, y = _prepare(x, y)
    return _ret(_gaussian(x, y, rho))


def eval_inverted_logistic(x, y, theta):
    """Inverted-logistic gauge ``(x^{1/θ} + y^{1/θ})^θ`` for θ in (0, 1]."""
    _check_half_open_unit("theta", theta)
    x, y = _prepare(x, y)
    return _ret(_inverted_logistic(x, y, theta))


def eval_rectangular(x, y, theta):
    """Rectangle gauge ``max(|x - y|/θ, (x + y)/(2 - θ))`` for θ in (0, 1]."""
    _check_half_open_unit("theta", theta)
    x, y = _prepare(x, y)
    return _ret(_rectangular(x, y, theta))


def eval_maxmin(x, y, theta):
    """Single-parameter max-min gauge.

    For ``θ < 1`` this is ``max/θ + (1 - 1/θ) min``, the logistic gauge
    with parameter θ, whose limit set is pointy at ``(1, 1)``. For
    ``θ >= 1`` it is ``max + (1 - 1/θ) min``: the unit square at
    ``θ = 1`` and the independence gauge ``x + y`` as ``θ -> inf``, with a
    blunt limit set in between. That branch already has coordinatewise
    supremum ``(1, 1)``, so no rescaling is needed.

    Parameters
    ----------
    x, y : float or array_like
        Non-negative coordinates.
    theta : float
        Positive parameter; the branch switches at 1.

    Examples
    --------
    >>> eval_maxmin(1.0, 1.0, 0.5)
    1.0
    >>> eval_maxmin(1.0, 1.0, 2.0)
    1.5
    """
    if not (theta > 0.0 and np.isfinite(theta)):
        raise ValueError(f"theta must be positive, got {theta}")
    x, y = _prepare(x, y)
    return _ret(_maxmin(x, y, theta))


# ---------------------------------------------------------------------------
# gauge objects


class Gauge:
    """Base class for gauge functions.

    Subclasses implement :meth:`_eval` on validated float arrays; calling
    the instance checks the inputs, broadcasts and returns a float for
    scalar input.
    """

    family: ClassVar[str] = "Gauge"
    symmetric: ClassVar[bool] = True

    def __call__(self, x, y):
        x, y = _prepare(x, y)
        return _ret(self._eval(x, y))

    def _eval(self, x, y):  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def params(self) -> dict:
        """Named parameter values."""
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)
                if isinstance(getattr(self, f.name), (int, float))}

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params}

    def on_simplex(self, w):
        """``g(w, 1 - w)``, the gamma rate along angle `w`."""
        w = np.asarray(w, dtype=float)
        return self(w, 1.0 - w)


@dataclass(frozen=True)
class Logistic(Gauge):
    """Logistic gauge; pointy limit set for every γ in (0, 1)."""

    gamma: float
    family: ClassVar[str] = "Logistic"

    def __post_init__(self):
        _check_open_unit("gamma", self.gamma)

    def _eval(self, x, y):
        return _logistic(x, y, self.gamma)


@dataclass(frozen=True)
class Gaussian(Gauge):
    """Gaussian gauge with correlation ρ in [0, 1); ρ = 0 is independence."""

    rho: float
    family: ClassVar[str] = "Gaussian"

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")

    def _eval(self, x, y):
        return _gaussian(x, y, self.rho)


@dataclass(frozen=True)
class InvertedLogistic(Gauge):
    """Inverted-logistic gauge with θ in (0, 1]; θ = 1 is independence."""

    theta: float
    family: ClassVar[str] = "InvertedLogistic"

    def __post_init__(self):
        _check_half_open_unit("theta", self.theta)

    def _eval(self, x, y):
        return _inverted_logistic(x, y, self.theta)


@dataclass(frozen=True)
class Rectangular(Gauge):
    """Rectangle gauge with θ in (0, 1]; θ = 1 is independence."""

    theta: float
    family: ClassVar[str] = "Rectangular"

    def __post_init__(self):
        _check_half_open_unit("theta", self.theta)

    def _eval(self, x, y):
        return _rectangular(x, y, self.theta)


@dataclass(frozen=True)
class MaxMin(Gauge):
    """Max-min gauge, see :func:`eval_maxmin`."""

    theta: float
    family: ClassVar[str] = "MaxMin"

    def __post_init__(self):
        if not (self.theta > 0.0 and np.isfinite(self.theta)):
            raise ValueError(f"theta must be positive, got {self.theta}")

    def _eval(self, x, y):
        return _maxmin(x, y, self.theta)


@dataclass(frozen=True)
class PointwiseMin(Gauge):
    """Pointwise minimum of two gauges (union of their limit sets)."""

    first: Gauge
    second: Gauge
    family: ClassVar[str] = "PointwiseMin"

    def _eval(self, x, y):
        return np.minimum(self.first._eval(x, y), self.second._eval(x, y))

    def to_dict(self) -> dict:
        return {"family": self.family, "first": self.first.to_dict(),
                "second": self.second.to_dict()}


# ---------------------------------------------------------------------------
# boundary profiles


def default_q_grid(q_max: float = Q_MAX, n_unit: int = 2001, n_outer: int = 401) -> np.ndarray:
    """Grid on ``[0, q_max]``: dense on ``[0, 1]``, coarser beyond."""
    if q_max < 1.0:
        raise ValueError("q_max must be at least 1")
    inner = np.linspace(0.0, 1.0, n_unit)
    if q_max == 1.0:
        return inner
    outer = np.linspace(1.0, q_max, n_outer)[1:]
    return np.concatenate([inner, outer])


def _three_point(f, q, side, h):
    if side == "+":
        return float((-3.0 * f(q) + 4.0 * f(q + h) - f(q + 2.0 * h)) / (2.0 * h))
    if side == "-":
        return float((3.0 * f(q) - 4.0 * f(q - h) + f(q - 2.0 * h)) / (2.0 * h))
    raise ValueError("side must be '+' or '-'")


def one_sided_derivative(f: Callable, q: float, side: str, h: float = FD_STEP,
                         long_step: float = 1e-3, agree: float = 1e-9) -> float:
    """Three-point one-sided finite difference of `f` at `q`.

    ``side="+"`` uses ``f(q), f(q+h), f(q+2h)``; ``side="-"`` mirrors it.
    Second-order accurate on smooth pieces, and never straddles a kink at
    `q` itself.

    Rounding limits the step-`h` estimate to roughly ``1e-16/h``. The same
    stencil with `long_step` is returned instead when both agree to
    `agree`, which happens on (nearly) linear pieces. Pass
    ``long_step=None`` to disable this.
    """
    d = _three_point(f, q, side, h)
    if long_step is None or long_step <= h:
        return d
    if side == "-" and q - 2.0 * long_step < 0.0:
        return d
    d_long = _three_point(f, q, side, long_step)
    if abs(d_long - d) <= agree * max(1.0, abs(d)):
        return d_long
    return d


@dataclass(frozen=True, eq=False)
class BoundaryFunctions:
    """Boundary functions of a gauge sampled on a grid.

    Attributes
    ----------
    gauge : Gauge
        Source gauge, kept so derivatives can be evaluated off-grid.
    grid : ndarray
        Strictly increasing q values in ``[0, q_max]``.
    k_values, k_tilde_values : ndarray
        ``g(1, q)`` and ``g(q, 1)`` on the grid.
    """

    gauge: Gauge
    grid: np.ndarray
    k_values: np.ndarray
    k_tilde_values: np.ndarray
    step: float = FD_STEP
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def k(self, q):
        return self.gauge(1.0, q)

    def k_tilde(self, q):
        return self.gauge(q, 1.0)

    def function(self, which: str) -> Callable:
        if which == "k":
            return self.k
        if which == "k_tilde":
            return self.k_tilde
        raise ValueError("which must be 'k' or 'k_tilde'")

    def values(self, which: str) -> np.ndarray:
        return self.k_values if which == "k" else self.k_tilde_values

    def derivative(self, q: float, side: str, which: str = "k") -> float:
        """One-sided derivative of k (or k̃) at `q` with the profile step."""
        key = (float(q), side, which)
        if key not in self._cache:
            if side == "-" and q - 2 * self.step < 0:
                raise ValueError("left derivative undefined at the grid start")
            self._cache[key] = one_sided_derivative(self.function(which), q, side, self.step)
        return self._cache[key]


def boundary_profile(g: Gauge, grid=None, q_max: float = Q_MAX,
                     step: float = FD_STEP) -> BoundaryFunctions:
    """Evaluate ``k(q) = g(1, q)`` and ``k̃(q) = g(q, 1)`` on a grid.

    Parameters
    ----------
    g : Gauge
        Gauge to profile.
    grid : array_like, optional
        Increasing values in ``[0, q_max]`` containing 0 and 1. Defaults
        to :func:`default_q_grid`.
    q_max : float
        Upper end of the default grid.
    step : float
        Finite-difference step for one-sided derivatives.

    Returns
    -------
    BoundaryFunctions
    """
    grid = default_q_grid(q_max) if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if grid[0] < 0:
        raise ValueError("grid must lie in [0, q_max]")
    ones = np.ones_like(grid)
    return BoundaryFunctions(g, grid, np.asarray(g(ones, grid)), np.asarray(g(grid, ones)), step)


# ---------------------------------------------------------------------------
# level sets


def level_set(g: Gauge, n: int = 1001):
    """Points ``(w, 1 - w) / g(w, 1 - w)`` on the unit level curve.

    Returns
    -------
    w, x, y : ndarray
    """
    w = np.linspace(0.0, 1.0, n)
    gw = np.asarray(g(w, 1.0 - w))
    return w, w / gw, (1.0 - w) / gw


def write_level_set_csv(g: Gauge, path, n: int = 1001) -> None:
    """Write the unit level curve as CSV rows ``w,x,y``."""
    w, x, y = level_set(g, n)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["w", "x", "y"])
        for row in zip(w, x, y):
            wr.writerow([repr(float(v)) for v in row])
