"""Angular radial thresholds from rolling-window quantiles.

Points ``(x, y)`` are mapped to ``r = x + y`` and ``w = x / r``. The
threshold ``r_τ(w)`` is built from empirical τ-quantiles of ``r`` within
equal-width overlapping windows on ``w ∈ [0, 1]``. Each window centre
becomes a knot whose value is the mean of the quantiles of all windows
covering it. Between knots the threshold is linear, and beyond the
outermost knots it is flat.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AngularRadialSample",
    "ThresholdFunction",
    "InsufficientDataError",
    "to_angular",
    "window_layout",
    "rolling_quantile_threshold",
]

N_WINDOWS = 17
OVERLAP = 0.5
MIN_PER_WINDOW = 30


class InsufficientDataError(ValueError):
    """A window holds too few points for a stable quantile."""


@dataclass(frozen=True, eq=False)
class AngularRadialSample:
    """Radii ``r = x + y`` and angles ``w = x / r``."""

    r: np.ndarray
    w: np.ndarray

    def __len__(self):
        return self.r.size

    def to_cartesian(self):
        return self.r * self.w, self.r * (1.0 - self.w)


def to_angular(x, y=None) -> AngularRadialSample:
    """Radial-angular transform of positive-quadrant points.

    Parameters
    ----------
    x, y : array_like
        Coordinates; alternatively pass an ``(n, 2)`` array as `x`.

    Examples
    --------
    >>> s = to_angular([3.0], [1.0])
    >>> float(s.r[0]), float(s.w[0])
    (4.0, 0.75)
    """
    if y is None:
        pts = np.asarray(x, dtype=float)
        x, y = pts[:, 0], pts[:, 1]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(x < 0) or np.any(y < 0) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("points must be finite and lie in the non-negative quadrant")
    r = x + y
    if np.any(r <= 0):
        raise ValueError("the origin has no angle")
    return AngularRadialSample(r, x / r)


@dataclass(frozen=True, eq=False)
class ThresholdFunction:
    """Piecewise-linear threshold with flat extrapolation.

    Attributes
    ----------
    knots : ndarray
        Increasing angles in ``[0, 1]``.
    values : ndarray
        Positive threshold radii at the knots.
    tau : float or None
        Quantile level the threshold was estimated at.
    """

    knots: np.ndarray
    values: np.ndarray
    tau: float | None = None

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size < 1:
            raise ValueError("knots and values must be equal-length 1-d arrays")
        if np.any(np.diff(k) <= 0) or k[0] < 0 or k[-1] > 1:
            raise ValueError("knots must be strictly increasing inside [0, 1]")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("threshold values must be positive and finite")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    def __call__(self, w):
        out = np.interp(np.asarray(w, dtype=float), self.knots, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["w", "r_tau"])
            for k, v in zip(self.knots, self.values):
                wr.writerow([repr(float(k)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, tau: float | None = None) -> "ThresholdFunction":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["w"]) for r in rows]),
                   np.array([float(r["r_tau"]) for r in rows]), tau)

    def to_dict(self) -> dict:
        return {"knots": self.knots.tolist(), "values": self.values.tolist(), "tau": self.tau}

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdFunction":
        return cls(np.asarray(d["knots"], float), np.asarray(d["values"], float), d.get("tau"))


def window_layout(n_windows: int = N_WINDOWS, overlap: float = OVERLAP):
    """Left edges, width and centres of equal-width overlapping windows.

    Consecutive windows share a fraction `overlap` of their width, and
    together they tile ``[0, 1]`` exactly.
    """
    if n_windows < 3:
        raise ValueError("at least three windows are required")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap fraction must lie in [0, 1)")
    width = 1.0 / (1.0 + (n_windows - 1) * (1.0 - overlap))
    step = width * (1.0 - overlap)
    left = np.arange(n_windows) * step
    return left, width, left + 0.5 * width


def rolling_quantile_threshold(sample: AngularRadialSample, tau: float = 0.95,
                               n_windows: int = N_WINDOWS, overlap_fraction: float = OVERLAP,
                               min_per_window: int = MIN_PER_WINDOW,
                               sparse: str = "error") -> ThresholdFunction:
    """Estimate ``r_τ(w)`` by rolling-window empirical quantiles.

    Parameters
    ----------
    sample : AngularRadialSample
        Radii and angles.
    tau : float
        Quantile level in (0.5, 1).
    n_windows : int
        Number of windows (at least 3).
    overlap_fraction : float
        Fraction of a window shared with its neighbour.
    min_per_window : int
        Minimum number of points per window.
    sparse : {"error", "expand"}
        What to do with a window holding fewer than `min_per_window`
        points. ``"error"`` raises; ``"expand"`` uses the
        `min_per_window` points whose angles are closest to the window
        centre, which amounts to widening that window symmetrically.

    Returns
    -------
    ThresholdFunction
        Knots at the window centres.

    Raises
    ------
    InsufficientDataError
        If any window contains fewer than `min_per_window` points and
        `sparse` is ``"error"``, or the whole sample is that small.
    """
    if not 0.5 < tau < 1.0:
        raise ValueError("tau must lie in (0.5, 1)")
    if sparse not in ("error", "expand"):
        raise ValueError(f"sparse must be 'error' or 'expand', got {sparse!r}")
    if len(sample) < min_per_window:
        raise InsufficientDataError(f"{len(sample)} points, fewer than {min_per_window}")
    left, width, centres = window_layout(n_windows, overlap_fraction)
    r, w = sample.r, sample.w
    slack = 1e-12
    q = np.empty(n_windows)
    for j, a in enumerate(left):
        inside = (w >= a - slack) & (w <= a + width + slack)
        if inside.sum() < min_per_window and sparse == "expand":
            nearest = np.argsort(np.abs(w - (a + 0.5 * width)), kind="stable")[:min_per_window]
            q[j] = np.quantile(r[nearest], tau)
            continue
        if inside.sum() < min_per_window:
            raise InsufficientDataError(
                f"window {j} on [{a:.4f}, {a + width:.4f}] holds {int(inside.sum())} points, "
                f"fewer than {min_per_window}")
        q[j] = np.quantile(r[inside], tau)  # linear interpolation of order statistics
    values = np.empty(n_windows)
    for j, c in enumerate(centres):
        cover = (left <= c + slack) & (left + width >= c - slack)
        values[j] = q[cover].mean()
    return ThresholdFunction(centres, values, tau)
