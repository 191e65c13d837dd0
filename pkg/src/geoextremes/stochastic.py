"""Gauges of stochastic additive mixtures ``Y = γ S (1, 1) + V``.

``S`` is a unit exponential variable shared by both coordinates and ``V``
has gauge ``g_V``. For ``γ <= 1`` the gauge of ``Y`` is the
inf-convolution

    g_Y(x, y) = min_{0 <= s <= min(x, y)/γ} { s + g_V(x - γs, y - γs) },

and for ``γ > 1`` the same minimisation is applied at ``(γx, γy)``, which
keeps the coordinatewise supremum of the limit set at ``(1, 1)``.

For convex symmetric ``g_V`` the minimiser has an explicit form. Draw the
line from ``(γ, γ)`` that touches the unit level curve of ``g_V`` at a
point ``(x0, y0)`` with ``x0 < y0``. Rays below that point (closer to an
axis) keep ``g_V``; rays between it and the diagonal follow the tangent
line. When ``γ <= 1/g_V(1, 1)`` the point ``(γ, γ)`` lies inside the
level set, no tangent exists and ``g_Y = g_V``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy.optimize import brentq

from .gauges import Gauge, Gaussian, InvertedLogistic, Rectangular

__all__ = [
    "TangentPoint",
    "StochasticMixture",
    "tangent_point_gaussian",
    "tangent_point_invlogistic",
    "tangent_point_rectangular",
    "tangent_point",
    "eval_stochastic_gauge",
    "minimizer_s_hat",
    "s_hat_gaussian_quadratic",
    "base_eta",
    "eta_of",
]


@dataclass(frozen=True)
class TangentPoint:
    """Touching point of the line through ``(γ, γ)`` on ``{g_V = 1}``.

    Attributes
    ----------
    x0, y0 : float
        Coordinates with ``0 <= x0 < y0 <= 1`` on the upper branch.
    gamma : float
        Mixing strength the point was computed for.
    """

    x0: float
    y0: float
    gamma: float

    @property
    def slope(self) -> float:
        """``m = (γ - y0) / (γ - x0)``."""
        return (self.gamma - self.y0) / (self.gamma - self.x0)

    @property
    def ratio(self) -> float:
        """Angular boundary ``x0 / (x0 + y0)`` between the two regimes."""
        return self.x0 / (self.x0 + self.y0)


def base_eta(base: Gauge) -> float:
    """``1 / g_V(1, 1)``, the residual tail coefficient of the base gauge."""
    return 1.0 / float(base(1.0, 1.0))


def _check_gamma_range(gamma, lower, name):
    if not gamma > lower:
        raise ValueError(
            f"{name}: mixing strength {gamma} does not exceed 1/g_V(1,1) = {lower}; "
            "the gauge equals g_V and no tangent point exists")


def tangent_point_gaussian(rho: float, gamma: float) -> TangentPoint:
    """Tangent point for the Gaussian base gauge.

    ``x0`` is the smaller root of
    ``(2γ-1)² x² + (2γ-1)(1-ρ²-2γ) x + ρ²γ² = 0`` and ``y0`` follows from
    the upper branch of the unit level curve. Valid for every
    ``γ > (1 + ρ)/2``, including ``γ > 1``.

    Examples
    --------
    >>> tp = tangent_point_gaussian(0.0, 1.0)
    >>> (tp.x0, tp.y0)
    (0.0, 1.0)
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    _check_gamma_range(gamma, (1.0 + rho) / 2.0, "Gaussian")
    a = (2.0 * gamma - 1.0) ** 2
    b = (2.0 * gamma - 1.0) * (1.0 - rho * rho - 2.0 * gamma)
    c = rho * rho * gamma * gamma
    disc = b * b - 4.0 * a * c
    if disc < -1e-12:
        raise ArithmeticError(f"negative discriminant {disc} in the Gaussian tangent equation")
    sq = math.sqrt(max(disc, 0.0))
    # smaller root, written to avoid cancellation (b < 0 here)
    x0 = (2.0 * c) / (-b + sq) if (-b + sq) > 0 else 0.0
    x0 = min(max(x0, 0.0), 1.0)
    s2 = 1.0 - rho * rho
    y0 = 2.0 * rho * math.sqrt(max(s2 * (x0 - x0 * x0), 0.0)) - x0 * (1.0 - 2.0 * rho * rho) + s2
    return TangentPoint(x0, y0, gamma)


def _invlog_phi(z, theta):
    return (1.0 - z) ** (1.0 - theta) + z ** (1.0 - theta)


def tangent_point_invlogistic(theta: float, gamma: float) -> TangentPoint:
    """Tangent point for the inverted-logistic base gauge.

    Solves ``1/γ = (1 - z)^{1-θ} + z^{1-θ}`` for ``z`` in ``(0, 1/2)`` by
    bisection and returns ``(z^θ, (1 - z)^θ)``. The left-hand side rises
    from 1 at ``z = 0`` to ``2^θ`` at ``z = 1/2``, so for ``γ >= 1`` the
    touching point degenerates to ``(0, 1)``.

    Examples
    --------
    >>> tp = tangent_point_invlogistic(0.5, 0.75)
    >>> round(tp.x0, 2), round(tp.y0, 2)
    (0.43, 0.9)
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1) for a tangent point, got {theta}")
    _check_gamma_range(gamma, 2.0 ** (-theta), "inverted logistic")
    if gamma >= 1.0:
        return TangentPoint(0.0, 1.0, gamma)
    target = 1.0 / gamma
    z = brentq(lambda t: _invlog_phi(t, theta) - target, 0.0, 0.5, xtol=1e-300, rtol=1e-15,
               maxiter=500)
    return TangentPoint(z ** theta, (1.0 - z) ** theta, gamma)


def tangent_point_rectangular(theta: float, gamma: float) -> TangentPoint:
    """Tangent point ``(1 - θ, 1)`` for the rectangle base gauge.

    The line from ``(γ, γ)`` supports the level set at its corner; see
    :class:`TangentPoint`.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    _check_gamma_range(gamma, 1.0 - theta / 2.0, "rectangle")
    return TangentPoint(1.0 - theta, 1.0, gamma)


def tangent_point(base: Gauge, gamma: float) -> TangentPoint:
    """Dispatch to the family-specific tangent-point solver."""
    if isinstance(base, Gaussian):
        return tangent_point_gaussian(base.rho, gamma)
    if isinstance(base, InvertedLogistic):
        if base.theta == 1.0:
            # x + y: same geometry as the Gaussian gauge with ρ = 0
            return tangent_point_gaussian(0.0, gamma)
        return tangent_point_invlogistic(base.theta, gamma)
    if isinstance(base, Rectangular):
        return tangent_point_rectangular(base.theta, gamma)
    raise TypeError(f"no tangent-point solver for {type(base).__name__}")


@dataclass(frozen=True)
class StochasticMixture(Gauge):
    """Gauge of ``Y = γ S (1, 1) + V`` for a Gaussian, inverted-logistic or
    rectangle base gauge ``g_V``.

    Attributes
    ----------
    base : Gauge
        Gauge of ``V``.
    gamma : float
        Positive mixing strength; ``γ > 1`` gives a pointy limit set.
    tangent : TangentPoint or None
        ``None`` when ``γ <= 1/g_V(1, 1)`` and the gauge equals ``g_V``.
    """

    base: Gauge
    gamma: float
    tangent: TangentPoint | None = field(init=False)
    family: ClassVar[str] = "StochasticMix"

    def __post_init__(self):
        if not isinstance(self.base, (Gaussian, InvertedLogistic, Rectangular)):
            raise TypeError("base gauge must be Gaussian, InvertedLogistic or Rectangular")
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        tp = None
        if self.gamma > base_eta(self.base):
            tp = tangent_point(self.base, self.gamma)
        object.__setattr__(self, "tangent", tp)

    def _inner(self, x, y):
        """Inf-convolution with mixing strength γ at ``(x, y)``."""
        gv = self.base._eval(x, y)
        tp = self.tangent
        if tp is None:
            return gv
        g = self.gamma
        m = tp.slope
        mx, mn = np.maximum(x, y), np.minimum(x, y)
        tot = x + y
        with np.errstate(invalid="ignore", divide="ignore"):
            outer = mn <= tp.ratio * tot
        line = (mx - m * mn) / (g * (1.0 - m))
        return np.where(outer, gv, line)

    def _eval(self, x, y):
        if self.gamma > 1.0:
            return self.gamma * self._inner(x, y)
        return self._inner(x, y)

    @property
    def params(self) -> dict:
        out = dict(self.base.params)
        out["gamma"] = self.gamma
        return out

    def to_dict(self) -> dict:
        return {"family": self.family, "base": self.base.to_dict(), "gamma": self.gamma}


def eval_stochastic_gauge(spec: StochasticMixture, x, y):
    """Evaluate the piecewise explicit gauge of a stochastic mixture."""
    return spec(x, y)


def minimizer_s_hat(spec: StochasticMixture, x, y):
    """Minimising ``s`` of the inf-convolution at ``(x, y)``.

    Zero in the outer angular region, otherwise
    ``(x0·y - y0·x) / (γ(x0 - y0))`` (mirrored for ``y < x``). For
    ``γ > 1`` the minimisation variable is the one of the rescaled
    problem at ``(γx, γy)``; it always lies in ``[0, min(x, y)/γ]`` of
    that problem.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.gamma > 1.0:
        x, y = spec.gamma * x, spec.gamma * y
    tp = spec.tangent
    if tp is None:
        out = np.zeros(np.broadcast(x, y).shape)
        return float(out) if out.ndim == 0 else out
    mx, mn = np.maximum(x, y), np.minimum(x, y)
    outer = mn <= tp.ratio * (x + y)
    s = (tp.x0 * mx - tp.y0 * mn) / (spec.gamma * (tp.x0 - tp.y0))
    s = np.where(outer, 0.0, np.clip(s, 0.0, mn / spec.gamma))
    return float(s) if np.ndim(s) == 0 else s


def s_hat_gaussian_quadratic(rho: float, gamma: float, x, y):
    """Minimiser for a Gaussian base from the quadratic-root formula.

    ``ŝ = (K(x+y) + √(-K ĉ)|x-y|) / (2γK)`` with ``ĉ = (1-ρ²-2γ)²`` and
    ``K = 4ρ²γ² - ĉ``; valid in the inner (tangent-line) region.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c_hat = (1.0 - rho * rho - 2.0 * gamma) ** 2
    k = 4.0 * rho * rho * gamma * gamma - c_hat
    s = (k * (x + y) + np.sqrt(-k * c_hat) * np.abs(x - y)) / (2.0 * gamma * k)
    return float(s) if np.ndim(s) == 0 else s


def eta_of(spec: StochasticMixture) -> float:
    """Residual tail dependence coefficient of a stochastic mixture.

    ``η^V`` when ``γ <= η^V``, ``γ`` when ``η^V < γ <= 1`` and 1 for
    ``γ > 1``, where ``η^V = 1/g_V(1, 1)``.
    """
    eta_v = base_eta(spec.base)
    if spec.gamma <= eta_v:
        return eta_v
    if spec.gamma <= 1.0:
        return float(spec.gamma)
    return 1.0
