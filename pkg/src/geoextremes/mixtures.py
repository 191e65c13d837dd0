"""Additive mixtures of two gauge functions.

``g*(x, y) = p g¹(x, y) + (1 - p) g²(x, y)`` is a gauge but, in general,
its unit level set does not reach the lines ``x = 1`` and ``y = 1``. For
symmetric components the rescaled gauge

    g(x, y) = g*(x, y) / g*(κ, 1)

restores the coordinatewise supremum, where κ minimises ``z -> g*(z, 1)``
on ``[0, 1]``. κ is also the ray along which the limit set touches the
boundary, i.e. the slope of the conditional extremes model.

The second component is always logistic. Closed forms for κ are given for
Gaussian, inverted-logistic and rectangle first components, and
:func:`numeric_supremum` provides a grid-plus-Brent fallback and oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy.optimize import minimize_scalar

from .gauges import Gauge, Gaussian, InvertedLogistic, Logistic, Rectangular

__all__ = [
    "MixtureSpec",
    "AdditiveMixture",
    "kappa_gauss_logistic",
    "kappa_invlog_logistic",
    "kappa_rect_logistic",
    "kappa_closed_form",
    "numeric_supremum",
    "build_rescaled_mixture",
    "gauss_logistic",
    "invlog_logistic",
    "rect_logistic",
]


def _check_common(p, gamma):
    if not 0.0 < p < 1.0:
        raise ValueError(f"weight p must lie in (0, 1), got {p}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"logistic gamma must lie in (0, 1), got {gamma}")


def kappa_gauss_logistic(p: float, rho: float, gamma: float) -> float:
    """κ for the Gaussian + logistic mixture.

    With ``K = (1 - ρ²)((1 - p)/p)(1/γ - 1)`` the derivative of
    ``z -> g*(z, 1)`` changes sign inside (0, 1) exactly when
    ``0 < ρ`` and ``K < 1 - ρ``; the minimiser is then ``ρ² / (1 - K)²``.
    Otherwise the function decreases on the whole interval and κ = 1
    (this includes ``K >= 1``). For ρ = 0 the function is linear in z and
    κ is 0 or 1 according to the sign of its slope.

    Examples
    --------
    >>> kappa_gauss_logistic(0.5, 0.0, 0.6)
    0.0
    >>> kappa_gauss_logistic(0.5, 0.5, 0.5)
    1.0
    """
    _check_common(p, gamma)
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    if rho == 0.0:
        return 0.0 if gamma >= 1.0 - p else 1.0
    big_k = (1.0 - rho * rho) * ((1.0 - p) / p) * (1.0 / gamma - 1.0)
    if big_k < 1.0 - rho:
        return rho * rho / (1.0 - big_k) ** 2
    return 1.0


def kappa_invlog_logistic(p: float, theta: float, gamma: float) -> float:
    """κ for the inverted-logistic + logistic mixture.

    Interior value ``[C^{1/(θ-1)} - 1]^{-θ}`` with
    ``C = ((1 - p)/p)(1/γ - 1)`` whenever ``C < 2^{θ-1}``; κ = 1 otherwise.
    At θ = 1 the first component is ``x + y`` and κ is 0 or 1.
    """
    _check_common(p, gamma)
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    c = ((1.0 - p) / p) * (1.0 / gamma - 1.0)
    if theta == 1.0:
        return 0.0 if gamma >= 1.0 - p else 1.0
    if c < 2.0 ** (theta - 1.0):
        if c == 0.0:
            return 0.0
        # a = c^{1/(θ-1)} > 2 can overflow as θ -> 1; work with log a
        log_a = np.log(c) / (theta - 1.0)
        return float(np.exp(-theta * (log_a + np.log1p(-np.exp(-log_a)))))
    return 1.0


def kappa_rect_logistic(p: float, theta: float, gamma: float) -> float:
    """κ for the rectangle + logistic mixture.

    ``g*(z, 1)`` is piecewise linear with a kink at ``z = 1 - θ``; the
    minimiser is the kink when the right-hand slope
    ``p/(2 - θ) + (1 - p)(1 - 1/γ)`` is positive and 1 otherwise.
    """
    _check_common(p, gamma)
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if theta == 1.0:
        return 0.0 if gamma >= 1.0 - p else 1.0
    slope = p / (2.0 - theta) + (1.0 - p) * (1.0 - 1.0 / gamma)
    return 1.0 - theta if slope > 0 else 1.0


def numeric_supremum(gstar, n_grid: int = 2001, xatol: float = 1e-12):
    """Minimise ``z -> g*(z, 1)`` over ``[0, 1]`` numerically.

    A coarse grid locates the best cell (the largest minimiser on ties,
    so flat bottoms resolve towards the diagonal), then a bounded Brent
    search refines inside the neighbouring cells.

    Parameters
    ----------
    gstar : callable
        Convex symmetric gauge ``g*(x, y)``; need not be normalised.

    Returns
    -------
    kappa : float
        Minimiser in ``[0, 1]``.
    scale : float
        ``1 / g*(κ, 1)``.
    """
    z = np.linspace(0.0, 1.0, n_grid)
    vals = np.asarray(gstar(z, np.ones_like(z)), dtype=float)
    vmin = vals.min()
    ties = np.flatnonzero(vals <= vmin + 1e-13 * max(1.0, abs(vmin)))
    j = int(ties[-1])
    lo, hi = z[max(j - 1, 0)], z[min(j + 1, n_grid - 1)]
    best_z, best_v = float(z[j]), float(vals[j])
    res = minimize_scalar(lambda t: float(gstar(t, 1.0)), bounds=(lo, hi),
                          method="bounded", options={"xatol": xatol})
    if res.fun < best_v - 1e-15 * max(1.0, abs(best_v)):
        best_z, best_v = float(res.x), float(res.fun)
    return best_z, 1.0 / best_v


def kappa_closed_form(first: Gauge, p: float, gamma: float):
    """Closed-form κ for a supported first component, else ``None``."""
    if isinstance(first, Gaussian):
        return kappa_gauss_logistic(p, first.rho, gamma)
    if isinstance(first, InvertedLogistic):
        return kappa_invlog_logistic(p, first.theta, gamma)
    if isinstance(first, Rectangular):
        return kappa_rect_logistic(p, first.theta, gamma)
    return None


@dataclass(frozen=True)
class MixtureSpec:
    """Two-component mixture: ``p·first + (1 - p)·second``."""

    first: Gauge
    second: Logistic
    p: float

    def __post_init__(self):
        if not isinstance(self.second, Logistic):
            raise TypeError("the second mixture component must be logistic")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"weight p must lie in (0, 1), got {self.p}")

    def raw(self, x, y):
        """Unscaled mixture ``g*``."""
        return self.p * self.first(x, y) + (1.0 - self.p) * self.second(x, y)


@dataclass(frozen=True)
class AdditiveMixture(Gauge):
    """Rescaled additive mixture ``g*(x, y) / g*(κ, 1)``.

    Attributes
    ----------
    kappa : float
        Minimiser of ``g*(z, 1)`` on ``[0, 1]`` (closed form when known).
    scale : float
        ``1 / g*(κ, 1)``.
    """

    first: Gauge
    second: Logistic
    p: float
    kappa: float = field(init=False)
    scale: float = field(init=False)
    family: ClassVar[str] = "AdditiveMix"

    def __post_init__(self):
        spec = MixtureSpec(self.first, self.second, self.p)
        kappa = kappa_closed_form(self.first, self.p, self.second.gamma)
        if kappa is None:
            kappa, _ = numeric_supremum(spec.raw)
        object.__setattr__(self, "kappa", float(kappa))
        object.__setattr__(self, "scale", 1.0 / float(spec.raw(kappa, 1.0)))

    @property
    def spec(self) -> MixtureSpec:
        return MixtureSpec(self.first, self.second, self.p)

    def _eval(self, x, y):
        raw = self.p * self.first._eval(x, y) + (1.0 - self.p) * self.second._eval(x, y)
        return raw * self.scale

    @property
    def params(self) -> dict:
        out = {"p": self.p}
        out.update({f"first_{k}": v for k, v in self.first.params.items()})
        out["gamma"] = self.second.gamma
        return out

    def to_dict(self) -> dict:
        return {"family": self.family, "p": self.p, "first": self.first.to_dict(),
                "second": self.second.to_dict(), "kappa": self.kappa, "scale": self.scale}


def build_rescaled_mixture(spec: MixtureSpec) -> AdditiveMixture:
    """Rescaled gauge of a :class:`MixtureSpec`."""
    return AdditiveMixture(spec.first, spec.second, spec.p)


def gauss_logistic(p: float, rho: float, gamma: float) -> AdditiveMixture:
    """Rescaled Gaussian + logistic mixture."""
    return AdditiveMixture(Gaussian(rho), Logistic(gamma), p)


def invlog_logistic(p: float, theta: float, gamma: float) -> AdditiveMixture:
    """Rescaled inverted-logistic + logistic mixture."""
    return AdditiveMixture(InvertedLogistic(theta), Logistic(gamma), p)


def rect_logistic(p: float, theta: float, gamma: float) -> AdditiveMixture:
    """Rescaled rectangle + logistic mixture."""
    return AdditiveMixture(Rectangular(theta), Logistic(gamma), p)
