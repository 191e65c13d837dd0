"""Simulation from a fitted model and tail-probability extrapolation.

With ``R' = R / r_τ(W)`` the fitted model describes ``(R, W) | R' > 1``:
angles follow their empirical distribution among exceedances and radii
follow the truncated gamma law. Conditioning further on ``R' > k`` for
``k >= 1`` reweights each angle by

    ω_k(w) = F̄(k r_τ(w); λ, g(w, 1-w)) / F̄(r_τ(w); λ, g(w, 1-w)),

so that ``P(R' > k | R' > 1)`` is the mean of ``ω_k`` over the exceedance
angles and ``W | R' > k`` is the weighted empirical law. A region ``C``
that lies entirely outside ``k·r_τ`` then has

    P(X ∈ C) = P(R' > 1) · P(R' > k | R' > 1) · P(X ∈ C | R' > k),

and the last factor is estimated by simulation. The largest admissible
``k`` is used so that as many simulated points as possible are relevant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .gauges import Gauge
from .inference import FitResult
from .special_math import as_generator, log_gamma_survival, sample_trunc_gamma
from .threshold import AngularRadialSample, ThresholdFunction, to_angular

__all__ = [
    "FittedModel",
    "RegionSpec",
    "RegionEstimate",
    "ExceedanceRegion",
    "UnreachableRegionError",
    "angle_weights",
    "simulate_conditional",
    "largest_k",
    "estimate_region_prob",
    "estimate_region_probs",
    "estimate_chi_m",
    "chi_plot",
    "write_chi_plot_csv",
    "estimate_eta",
    "estimate_kappa",
]

N_BOUNDARY_ANGLES = 721
K_SAFETY = 1e-9
BATCH = 250_000


class UnreachableRegionError(ValueError):
    """The region cannot be reached by extrapolation from the threshold."""


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Everything needed to simulate beyond the threshold.

    Attributes
    ----------
    gauge : Gauge
        Fitted gauge.
    lam : float
        Fitted gamma shape λ.
    threshold : ThresholdFunction
        Radial threshold ``r_τ(w)``.
    exceedance_angles : ndarray
        Angles of the records with ``R' > 1``.
    p_exceed : float
        Empirical ``P(R' > 1)``.
    """

    gauge: Gauge
    lam: float
    threshold: ThresholdFunction
    exceedance_angles: np.ndarray
    p_exceed: float

    def __post_init__(self):
        w = np.asarray(self.exceedance_angles, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("at least one exceedance angle is required")
        if not 0.0 < self.p_exceed < 1.0:
            raise ValueError(f"p_exceed must lie in (0, 1), got {self.p_exceed}")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        object.__setattr__(self, "exceedance_angles", w)
        # per-angle rate and threshold, fixed for the lifetime of the model
        object.__setattr__(self, "_rate", np.asarray(self.gauge(w, 1.0 - w), dtype=float))
        object.__setattr__(self, "_t", np.asarray(self.threshold(w), dtype=float))

    @classmethod
    def from_fit(cls, fit_result: FitResult, data, threshold: ThresholdFunction) -> "FittedModel":
        """Assemble a model from a fit and the sample it was fitted to.

        `data` is an ``(n, 2)`` array or an :class:`AngularRadialSample`.
        """
        sample = data if isinstance(data, AngularRadialSample) else to_angular(data)
        above = sample.r > threshold(sample.w)
        return cls(fit_result.gauge(), fit_result.lam, threshold, sample.w[above],
                   float(above.mean()))


def angle_weights(model: FittedModel, k: float) -> np.ndarray:
    """``ω_k`` at every exceedance angle."""
    if k < 1.0:
        raise ValueError("k must be at least 1")
    if k == 1.0:
        return np.ones(model.exceedance_angles.size)
    t, rate = model._t, model._rate
    lq_k = log_gamma_survival(k * t, shape=model.lam, rate=rate)
    lq_1 = log_gamma_survival(t, shape=model.lam, rate=rate)
    return np.exp(np.atleast_1d(lq_k - lq_1))


def _draw(model: FittedModel, k: float, n_sim: int, gen, weights=None):
    if weights is None:
        weights = angle_weights(model, k)
    total = weights.sum()
    if not total > 0 or not np.isfinite(total):
        raise UnreachableRegionError(
            f"all angle weights vanish at k={k:g}; the extrapolation level is unusable")
    idx = gen.choice(weights.size, size=n_sim, p=weights / total)
    w = model.exceedance_angles[idx]
    r = sample_trunc_gamma(gen, lower=k * model._t[idx], shape=model.lam, rate=model._rate[idx])
    r = np.atleast_1d(r)
    return r * w, r * (1.0 - w)


def simulate_conditional(model: FittedModel, k: float, n_sim: int, rng) -> np.ndarray:
    """Draw ``X | R' > k`` from the fitted model.

    Returns
    -------
    ndarray, shape (n_sim, 2)
        Points with ``x + y > k·r_τ(x / (x + y))``.
    """
    if k < 1.0:
        raise ValueError("k must be at least 1")
    if n_sim < 1:
        raise ValueError("n_sim must be positive")
    gen = as_generator(rng)
    x, y = _draw(model, k, n_sim, gen)
    return np.column_stack([x, y])


@dataclass(frozen=True)
class RegionSpec:
    """Rectangle ``(x_lo, x_hi) × (y_lo, y_hi)`` on exponential margins."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError("each lower bound must be below its upper bound")
        if self.x_lo < 0 or self.y_lo < 0:
            raise ValueError("regions live in the non-negative quadrant")

    def contains(self, x, y):
        return (x > self.x_lo) & (x < self.x_hi) & (y > self.y_lo) & (y < self.y_hi)

    def corner_angles(self) -> list:
        out = []
        for x in (self.x_lo, self.x_hi):
            for y in (self.y_lo, self.y_hi):
                if np.isfinite(x) and np.isfinite(y) and x + y > 0:
                    out.append(x / (x + y))
        return out

    def entry_radius(self, w):
        """Smallest ``r`` with ``r(w, 1-w)`` in the closed rectangle; inf if none."""
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lo_x = np.where(w > 0, self.x_lo / w, np.where(self.x_lo > 0, np.inf, 0.0))
            hi_x = np.where(w > 0, self.x_hi / w, np.inf)
            v = 1.0 - w
            lo_y = np.where(v > 0, self.y_lo / v, np.where(self.y_lo > 0, np.inf, 0.0))
            hi_y = np.where(v > 0, self.y_hi / v, np.inf)
        lo = np.maximum(lo_x, lo_y)
        hi = np.minimum(hi_x, hi_y)
        return np.where(lo <= hi, lo, np.inf)


@dataclass(frozen=True, eq=False)
class ExceedanceRegion:
    """The set ``{r > c·r_τ(w)}`` above a scaled threshold curve."""

    threshold: ThresholdFunction
    scale: float = 1.0

    def contains(self, x, y):
        r = x + y
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(r > 0, x / r, 0.5)
        return r > self.scale * self.threshold(w)

    def corner_angles(self) -> list:
        return []

    def entry_radius(self, w):
        return self.scale * np.asarray(self.threshold(w), dtype=float)


def largest_k(model: FittedModel, region: RegionSpec) -> float:
    """Largest ``k`` such that the region lies outside ``k·r_τ``.

    ``min_w r_in(w) / r_τ(w)`` over the rays meeting the region, checked
    on 721 angles plus the threshold knots and the region corners, then
    refined locally and shrunk by a relative margin of 1e-9.
    """
    w = np.unique(np.concatenate([np.linspace(0.0, 1.0, N_BOUNDARY_ANGLES),
                                  model.threshold.knots, region.corner_angles()]))

    def ratio(v):
        return region.entry_radius(v) / model.threshold(v)

    def bounded_ratio(v):
        # the optimiser cannot handle inf; rays missing the region get a huge value
        r = float(ratio(v))
        return r if np.isfinite(r) else 1e300

    vals = ratio(w)
    if not np.any(np.isfinite(vals)):
        raise UnreachableRegionError("the region is empty")
    j = int(np.argmin(vals))
    best = float(vals[j])
    lo, hi = w[max(j - 1, 0)], w[min(j + 1, w.size - 1)]
    if hi > lo:
        res = minimize_scalar(bounded_ratio, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        if np.isfinite(res.fun):
            best = min(best, float(res.fun))
    k = best * (1.0 - K_SAFETY)
    # a region starting exactly on the threshold is admissible at k = 1
    return 1.0 if k < 1.0 <= best else k


@dataclass(frozen=True)
class RegionEstimate:
    """Probability estimate with its Monte Carlo standard error.

    ``p_tail`` is ``P(R' > k | R' > 1)``, ``p_cond`` the simulated
    ``P(X ∈ C | R' > k)`` from ``hits`` out of ``n_sim`` draws.
    """

    prob: float
    se: float
    k: float
    p_tail: float
    p_cond: float
    hits: int
    n_sim: int


def estimate_region_probs(model: FittedModel, regions: Sequence[RegionSpec], n_sim: int, rng,
                          k: Optional[float] = None) -> list:
    """Estimate several region probabilities from one shared simulation.

    The common level is the smallest of the regions' largest admissible
    ``k`` (or `k` when given), so every region lies outside it.
    """
    if n_sim < 1:
        raise ValueError("n_sim must be positive")
    k_max = min(largest_k(model, reg) for reg in regions)
    if k is None:
        k = k_max
    if k < 1.0:
        raise UnreachableRegionError(
            f"a region reaches below the threshold (largest admissible k = {k_max:.6g} < 1)")
    if k > k_max * (1.0 + 1e-12):
        raise UnreachableRegionError(f"k={k:g} exceeds the admissible {k_max:g}")
    gen = as_generator(rng)
    weights = angle_weights(model, k)
    p_tail = float(weights.mean())
    hits = np.zeros(len(regions), dtype=np.int64)
    done = 0
    while done < n_sim:
        m = min(BATCH, n_sim - done)
        x, y = _draw(model, k, m, gen, weights)
        for i, reg in enumerate(regions):
            hits[i] += int(np.count_nonzero(reg.contains(x, y)))
        done += m
    out = []
    for h in hits:
        pc = float(h / n_sim)
        scale = model.p_exceed * p_tail
        se = scale * math.sqrt(pc * (1.0 - pc) / n_sim)
        out.append(RegionEstimate(float(scale * pc), float(se), float(k), p_tail, pc, int(h), int(n_sim)))
    return out


def estimate_region_prob(model: FittedModel, region: RegionSpec, n_sim: int, rng,
                         k: Optional[float] = None) -> RegionEstimate:
    """``P(X ∈ region)`` by extrapolation from the largest admissible ``k``.

    Raises
    ------
    UnreachableRegionError
        If the region dips below the threshold curve, so that no
        ``k >= 1`` works.
    """
    return estimate_region_probs(model, [region], n_sim, rng, k)[0]


def _chi_regions(u: float):
    q = -math.log1p(-u)
    return (RegionSpec(q, math.inf, q, math.inf), RegionSpec(q, math.inf, 0.0, math.inf))


def estimate_chi_m(model: FittedModel, u: float, n_sim: int, rng, with_se: bool = False):
    """Model-based ``χ_m(u) = P(X > q, Y > q) / P(X > q)``, ``q = -log(1-u)``.

    Both probabilities come from one simulation at a common level, so
    the ratio reduces to a hit ratio with binomial standard error.
    """
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0, 1)")
    both, first = estimate_region_probs(model, _chi_regions(u), n_sim, rng)
    if first.hits == 0:
        raise UnreachableRegionError(f"no simulated point reached x > {-math.log1p(-u):.4g}")
    chi = both.hits / first.hits
    se = math.sqrt(chi * (1.0 - chi) / first.hits)
    return (chi, se) if with_se else chi


def chi_plot(model: FittedModel, u_grid: Sequence[float], n_sim: int, rng) -> list:
    """Rows ``(u, chi_m, se, note)`` over a grid; unreachable levels give NaN."""
    gen = as_generator(rng)
    rows = []
    for u in u_grid:
        try:
            chi, se = estimate_chi_m(model, float(u), n_sim, gen, with_se=True)
            rows.append((float(u), chi, se, ""))
        except UnreachableRegionError as exc:
            rows.append((float(u), math.nan, math.nan, str(exc)))
    return rows


def write_chi_plot_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["u", "chi_m_hat", "mc_se", "note"])
        for u, chi, se, note in rows:
            wr.writerow([repr(u), repr(chi), repr(se), note])


# ---------------------------------------------------------------------------
# summaries of the gauge


def _grid_then_brent(f, lo, hi, n=2001, prefer_last=False):
    z = np.linspace(lo, hi, n)
    vals = np.asarray(f(z), dtype=float)
    vmin = vals.min()
    ties = np.flatnonzero(vals <= vmin + 1e-13 * max(1.0, abs(vmin)))
    j = int(ties[-1] if prefer_last else ties[0])
    best_z, best_v = float(z[j]), float(vals[j])
    a, b = z[max(j - 1, 0)], z[min(j + 1, n - 1)]
    res = minimize_scalar(lambda t: float(f(t)), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12})
    if res.fun < best_v - 1e-15 * max(1.0, abs(best_v)):
        best_z, best_v = float(res.x), float(res.fun)
    return best_z, best_v


def estimate_eta(g: Gauge) -> float:
    """Residual tail dependence ``1 / min_{t >= 1} min(g(1, t), g(t, 1))``.

    Since ``g >= max``, values of ``t`` beyond ``g(1, 1)`` cannot improve
    the minimum, which bounds the search interval.
    """
    top = max(float(g(1.0, 1.0)), 1.0)
    if top == 1.0:
        return 1.0

    def f(t):
        return np.minimum(g(1.0, t), g(t, 1.0))

    _, v = _grid_then_brent(f, 1.0, top)
    return float(1.0 / min(v, float(g(1.0, 1.0))))


def estimate_kappa(g: Gauge) -> float:
    """Conditional-extremes slope κ.

    Maximises ``(1 - w) / g(w, 1 - w)`` over ``w ∈ [0, 1/2]`` (largest
    maximiser on ties) and returns ``w / (1 - w)``.
    """
    def f(w):
        w = np.asarray(w, dtype=float)
        return -(1.0 - w) / g(w, 1.0 - w)

    w, _ = _grid_then_brent(f, 0.0, 0.5, prefer_last=True)
    return float(w / (1.0 - w))
