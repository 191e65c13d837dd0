"""Classification benchmark: simulate, threshold, fit, classify, tally.

For every scenario, dependence structure and gauge family the harness
counts how often the fitted gauge is classified correctly: sensitivity on
asymptotically dependent scenarios and specificity on independent ones.
Every replication draws its data from its own random stream, keyed by
``(scenario, structure, rep)``, so adding families or scenarios never
changes the data seen by other cells.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .classifier import classify
from .inference import exceedances, fit
from .special_math import RngStream, stable_hash64
from .synth import Scenario, scenario_catalog
from .threshold import rolling_quantile_threshold, to_angular

__all__ = ["CellResult", "BenchmarkReport", "run_rep", "run_benchmark", "DEFAULT_FAMILIES"]

DEFAULT_FAMILIES = ("mm", "expga")


@dataclass
class CellResult:
    """Tally for one (scenario, structure, family) cell."""

    scenario: str
    structure: str
    family: str
    truth: str
    metric: str
    correct: int = 0
    valid: int = 0
    failed: int = 0
    boundary: int = 0
    fit_time: float = 0.0

    @property
    def rate(self) -> float:
        return self.correct / self.valid if self.valid else math.nan

    @property
    def se(self) -> float:
        """Binomial standard error of the rate."""
        if not self.valid:
            return math.nan
        p = self.rate
        return math.sqrt(p * (1.0 - p) / self.valid)

    @property
    def mean_fit_time(self) -> float:
        return self.fit_time / max(self.valid + self.failed, 1)

    def row(self, timing: bool = True) -> dict:
        out = {"scenario": self.scenario, "structure": self.structure, "family": self.family,
               "truth": self.truth, "metric": self.metric, "value": self.rate, "se": self.se,
               "reps": self.valid, "failed": self.failed, "boundary": self.boundary}
        if timing:
            out["mean_fit_time"] = self.mean_fit_time
        return out


@dataclass
class BenchmarkReport:
    """Per-cell rates plus the per-family average over cells."""

    cells: list
    config: dict = field(default_factory=dict)

    def overall(self) -> dict:
        out = {}
        for fam in dict.fromkeys(c.family for c in self.cells):
            rates = [c.rate for c in self.cells if c.family == fam and c.valid]
            out[fam] = float(np.mean(rates)) if rates else math.nan
        return out

    def cell(self, scenario: str, structure: str, family: str) -> CellResult:
        for c in self.cells:
            if (c.scenario, c.structure, c.family) == (scenario, structure, family):
                return c
        raise KeyError((scenario, structure, family))

    def to_dict(self, timing: bool = True) -> dict:
        return {"config": self.config, "cells": [c.row(timing) for c in self.cells],
                "overall_average": self.overall()}

    def write(self, stem, timing: bool = True) -> None:
        """Write ``<stem>.json`` and ``<stem>.csv``."""
        d = self.to_dict(timing)
        with open(f"{stem}.json", "w", encoding="utf-8") as fh:
            json.dump(d, fh, indent=2)
            fh.write("\n")
        with open(f"{stem}.csv", "w", newline="", encoding="utf-8") as fh:
            fields = list(d["cells"][0].keys()) if d["cells"] else ["scenario"]
            wr = csv.DictWriter(fh, fieldnames=fields)
            wr.writeheader()
            for row in d["cells"]:
                wr.writerow(row)
            for fam, v in d["overall_average"].items():
                wr.writerow({"scenario": "overall", "family": fam, "value": v})


def data_stream(seed: int, scenario: Scenario, rep: int) -> RngStream:
    return RngStream(seed, stable_hash64(scenario.name, scenario.structure, rep))


def run_rep(scenario: Scenario, rep: int, families: Sequence[str], seed: int, n: int,
            tau: float) -> list:
    """One replication: returns ``(family, label or None, boundary, seconds)`` tuples."""
    xy = scenario.sample(n, data_stream(seed, scenario, rep))
    try:
        sample = to_angular(xy)
        th = rolling_quantile_threshold(sample, tau, sparse="expand")
        exc = exceedances(sample, th)
    except (ValueError, ArithmeticError):
        return [(fam, None, False, 0.0) for fam in families]
    out = []
    for fam in families:
        t0 = time.perf_counter()
        try:
            res = fit(exc, fam)
            label = classify(res.gauge()).label if res.converged else None
            boundary = res.boundary
        except (ValueError, ArithmeticError):
            label, boundary = None, False
        out.append((fam, label, boundary, time.perf_counter() - t0))
    return out


def _run_rep_packed(args):
    return run_rep(*args)


def run_benchmark(reps: int, n: int = 5000, tau: float = 0.95,
                  families: Sequence[str] = DEFAULT_FAMILIES, seed: int = 0,
                  scenarios: Optional[Sequence[Scenario]] = None, threads: int = 1,
                  progress=None) -> BenchmarkReport:
    """Run the classification benchmark.

    Parameters
    ----------
    reps : int
        Replications per (scenario, structure).
    n : int
        Sample size per replication.
    tau : float
        Threshold quantile level.
    families : sequence of str
        Gauge family tags.
    seed : int
        Master seed.
    scenarios : sequence of Scenario, optional
        Defaults to the full catalogue.
    threads : int
        Worker processes; results do not depend on it.
    progress : callable, optional
        Called with a short status string after each scenario.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    scenarios = list(scenarios) if scenarios is not None else scenario_catalog()
    families = list(families)
    cells = []
    jobs = []
    for sc in scenarios:
        metric = "sensitivity" if sc.truth_class == "AD" else "specificity"
        for fam in families:
            cells.append(CellResult(sc.name, sc.structure, fam, sc.truth_class, metric))
        jobs.extend((sc, rep, families, seed, n, tau) for rep in range(reps))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_rep_packed, jobs, chunksize=max(1, reps // threads)))
    else:
        results = []
        for i, job in enumerate(jobs):
            results.append(_run_rep_packed(job))
            if progress and (i + 1) % reps == 0:
                progress(f"{job[0].name}/{job[0].structure} done")
    index = {(c.scenario, c.structure, c.family): c for c in cells}
    for job, outcome in zip(jobs, results):
        sc = job[0]
        for fam, label, boundary, secs in outcome:
            c = index[(sc.name, sc.structure, fam)]
            c.fit_time += secs
            if label is None:
                c.failed += 1
                continue
            c.valid += 1
            c.boundary += int(boundary)
            c.correct += int(label == sc.truth_class)
    config = {"reps": reps, "n": n, "tau": tau, "families": families, "seed": seed,
              "scenarios": [f"{s.name}/{s.structure}" for s in scenarios]}
    return BenchmarkReport(cells, config)
