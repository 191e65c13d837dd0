"""Bivariate samplers on standard exponential margins and the benchmark scenarios.

Every sampler takes an ``rng`` (an :class:`~geoextremes.special_math.RngStream`,
a numpy ``Generator`` or an integer seed) and returns an ``(n, 2)`` array.
Margins are exact: each generator produces a known marginal law which is
mapped to Exp(1) analytically.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.special import log_ndtr

from .special_math import as_generator

__all__ = [
    "Scenario",
    "STRUCTURES",
    "sample_logistic_copula",
    "sample_gaussian_copula",
    "sample_inverted_logistic",
    "sample_dirichlet_model",
    "sample_structure",
    "scenario_catalog",
    "find_scenario",
    "empirical_chi",
    "empirical_eta",
    "write_dataset",
    "read_dataset",
]


def _frechet_to_exp(z):
    """Unit Fréchet to Exp(1): ``x = -log(1 - exp(-1/z))``."""
    return -np.log(-np.expm1(-1.0 / z))


def _positive_stable(gen: np.random.Generator, alpha: float, n: int) -> np.ndarray:
    """Positive α-stable variables with Laplace transform ``exp(-s^α)``.

    Kanter's representation of the Chambers-Mallows-Stuck construction
    for the totally skewed case.
    """
    u = gen.uniform(0.0, np.pi, n)
    w = gen.standard_exponential(n)
    # guard against sin(u) underflow at the ends of (0, π)
    u = np.clip(u, 1e-300, np.pi - 1e-15)
    a = np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
    b = (np.sin((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    return a * b


def _logistic_frechet(n: int, gamma_dep: float, rng) -> np.ndarray:
    if not 0.0 < gamma_dep < 1.0:
        raise ValueError(f"logistic dependence parameter must lie in (0, 1), got {gamma_dep}")
    gen = as_generator(rng)
    s = _positive_stable(gen, gamma_dep, n)
    e = gen.standard_exponential((n, 2))
    # P(Z <= z) = E exp(-S z^{-1/γ}) = exp(-1/z): unit Fréchet, logistic joint law
    return (s[:, None] / e) ** gamma_dep


def sample_logistic_copula(n: int, gamma_dep: float, rng) -> np.ndarray:
    """Logistic extreme-value dependence on Exp(1) margins.

    Parameters
    ----------
    n : int
        Sample size.
    gamma_dep : float
        Dependence parameter in (0, 1); smaller is stronger, χ = 2 - 2^γ.
    rng : RngStream, Generator or int
    """
    return _frechet_to_exp(_logistic_frechet(n, gamma_dep, rng))


def sample_inverted_logistic(n: int, theta: float, rng) -> np.ndarray:
    """Inverted logistic dependence on Exp(1) margins.

    The survival copula of the logistic model; with unit Fréchet ``Z``
    the reflected exponential variable is simply ``1/Z``.
    """
    return 1.0 / _logistic_frechet(n, theta, rng)


def sample_gaussian_copula(n: int, rho: float, rng) -> np.ndarray:
    """Gaussian copula with correlation ρ on Exp(1) margins."""
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho}")
    gen = as_generator(rng)
    chol = np.linalg.cholesky(np.array([[1.0, rho], [rho, 1.0]]))
    z = gen.standard_normal((n, 2)) @ chol.T
    # -log(1 - Φ(z)) = -log Φ(-z), stable for large z
    return -log_ndtr(-z)


def _dirichlet_angles(gen: np.random.Generator, alpha: float, beta: float, m: int) -> np.ndarray:
    """Draws from the normalised Dirichlet angular measure.

    The density is a two-part mixture of rescaled beta laws. Half of the
    mass uses ``G1 ~ Gamma(α + 1), G2 ~ Gamma(β)`` and half uses
    ``G1 ~ Gamma(α), G2 ~ Gamma(β + 1)``, with
    ``W = (G1/α) / (G1/α + G2/β)``.
    """
    first = gen.random(m) < 0.5
    g1 = gen.standard_gamma(np.where(first, alpha + 1.0, alpha))
    g2 = gen.standard_gamma(np.where(first, beta, beta + 1.0))
    a, b = g1 / alpha, g2 / beta
    return a / (a + b)


def sample_dirichlet_model(n: int, alpha: float, beta: float, rng,
                           max_rounds: int = 100000) -> np.ndarray:
    """Dirichlet extreme-value model on Exp(1) margins.

    Maxima of the Poisson process ``{(2W_i/Γ_i, 2(1 - W_i)/Γ_i)}`` with
    unit-rate arrival times ``Γ_i`` and i.i.d. angles ``W_i``. Since
    ``W <= 1`` no later point can change the maximum once
    ``2/Γ_i < min(Z1, Z2)``, so the simulation stops exactly there and
    the result has no truncation error.
    """
    if not (alpha > 0 and beta > 0):
        raise ValueError("Dirichlet parameters must be positive")
    gen = as_generator(rng)
    z = np.zeros((n, 2))
    arrival = np.zeros(n)
    active = np.arange(n)
    for _ in range(max_rounds):
        if active.size == 0:
            break
        arrival[active] += gen.standard_exponential(active.size)
        w = _dirichlet_angles(gen, alpha, beta, active.size)
        scale = 2.0 / arrival[active]
        z[active, 0] = np.maximum(z[active, 0], scale * w)
        z[active, 1] = np.maximum(z[active, 1], scale * (1.0 - w))
        still = scale >= np.minimum(z[active, 0], z[active, 1])
        active = active[still]
    else:
        raise RuntimeError("point-process simulation did not terminate; "
                           "the Dirichlet parameters are too extreme")
    return _frechet_to_exp(z)


STRUCTURES = {
    "logistic": ("gamma",),
    "dirichlet": ("alpha", "beta"),
    "inverted_logistic": ("theta",),
    "gaussian": ("rho",),
}
_ALIASES = {"log": "logistic", "diri": "dirichlet", "inv": "inverted_logistic",
            "invlogistic": "inverted_logistic", "ga": "gaussian"}


def sample_structure(structure: str, params: dict, n: int, rng) -> np.ndarray:
    """Dispatch to a sampler by structure name."""
    s = _ALIASES.get(structure, structure)
    if s == "logistic":
        return sample_logistic_copula(n, params["gamma"], rng)
    if s == "dirichlet":
        return sample_dirichlet_model(n, params["alpha"], params["beta"], rng)
    if s == "inverted_logistic":
        return sample_inverted_logistic(n, params["theta"], rng)
    if s == "gaussian":
        return sample_gaussian_copula(n, params["rho"], rng)
    raise ValueError(f"unknown dependence structure {structure!r}")


@dataclass(frozen=True)
class Scenario:
    """A named benchmark configuration.

    ``truth_class`` is ``"AD"`` or ``"AI"``; exactly one of `chi` and
    `eta` is set.
    """

    index: int
    name: str
    structure: str
    params: dict
    truth_class: str
    chi: Optional[float] = None
    eta: Optional[float] = None

    def sample(self, n: int, rng) -> np.ndarray:
        return sample_structure(self.structure, self.params, n, rng)

    @property
    def truth(self) -> dict:
        out = {"class": self.truth_class}
        if self.chi is not None:
            out["chi"] = self.chi
        if self.eta is not None:
            out["eta"] = self.eta
        return out

    def to_dict(self) -> dict:
        return asdict(self)


def scenario_catalog() -> list:
    """The five scenarios, each with two dependence structures."""
    rows = [
        (1, "st.d.AD", "logistic", {"gamma": 0.2}, "AD", 0.85, None),
        (1, "st.d.AD", "dirichlet", {"alpha": 14.0, "beta": 14.0}, "AD", 0.85, None),
        (2, "mst.d.AD", "logistic", {"gamma": 0.4}, "AD", 0.68, None),
        (2, "mst.d.AD", "dirichlet", {"alpha": 2.85, "beta": 2.85}, "AD", 0.68, None),
        (3, "w.d.AD", "logistic", {"gamma": 0.8}, "AD", 0.26, None),
        (3, "w.d.AD", "dirichlet", {"alpha": 0.285, "beta": 0.285}, "AD", 0.26, None),
        (4, "st.d.AI", "inverted_logistic", {"theta": 0.2}, "AI", None, 0.87),
        (4, "st.d.AI", "gaussian", {"rho": 0.74}, "AI", None, 0.87),
        (5, "w.d.AI", "inverted_logistic", {"theta": 0.8}, "AI", None, 0.57),
        (5, "w.d.AI", "gaussian", {"rho": 0.14}, "AI", None, 0.57),
    ]
    return [Scenario(*r) for r in rows]


def find_scenario(name: str, structure: str) -> Scenario:
    """Look up a scenario by name (or index) and structure."""
    structure = _ALIASES.get(structure, structure)
    for sc in scenario_catalog():
        if (sc.name == name or str(sc.index) == str(name)) and sc.structure == structure:
            return sc
    raise ValueError(f"no scenario {name!r} with structure {structure!r}")


def empirical_chi(xy, u: float) -> float:
    """``P(X > q, Y > q) / P(X > q)`` with ``q`` the Exp(1) u-quantile."""
    xy = np.asarray(xy, dtype=float)
    q = -np.log1p(-u)
    above_x = xy[:, 0] > q
    both = above_x & (xy[:, 1] > q)
    return float(both.sum() / max(above_x.sum(), 1))


def empirical_eta(xy, prob: float = 0.95) -> float:
    """Hill-type estimate of η from ``T = min(X, Y)``.

    On exponential margins ``P(T > t) ≈ c·exp(-t/η)``, so the mean excess
    of ``T`` over a high quantile estimates η.
    """
    t = np.min(np.asarray(xy, dtype=float), axis=1)
    u = np.quantile(t, prob)
    return float(np.mean(t[t > u] - u))


def write_dataset(xy, path, meta: Optional[dict] = None) -> None:
    """Write ``x,y`` rows and, when `meta` is given, a ``.json`` sidecar."""
    xy = np.asarray(xy, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y"])
        for a, b in xy:
            wr.writerow([repr(float(a)), repr(float(b))])
    if meta is not None:
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_dataset(path) -> np.ndarray:
    """Read an ``x,y`` CSV written by :func:`write_dataset` or by hand."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader)]
        if header[:2] != ["x", "y"]:
            raise ValueError(f"{path}: expected header 'x,y', found {','.join(header)}")
        rows = [(float(a), float(b)) for a, b, *_ in reader]
    return np.array(rows, dtype=float).reshape(-1, 2)
