"""Command-line interface.

Commands
--------
gen        simulate a benchmark scenario to CSV with a JSON sidecar
fit        threshold a CSV, fit gauge families, write fits and an AIC table
classify   classify a fitted gauge from its fit JSON
benchmark  run the classification benchmark
levelset   export the unit level set of a gauge
chiplot    model-based χ_m(u) over a grid of u
prob       probability of a rectangle in the joint tail

Exit status is 0 on success, 2 on invalid input and 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .benchmark import DEFAULT_FAMILIES, run_benchmark
from .classifier import classify
from .gauges import write_level_set_csv
from .inference import FAMILIES, TABLE_FAMILIES, FitResult, exceedances, fit
from .special_math import NumericError, RngStream, stable_hash64
from .synth import find_scenario, read_dataset, scenario_catalog, write_dataset
from .tail_sim import (FittedModel, RegionSpec, chi_plot, estimate_eta, estimate_kappa,
                       estimate_region_prob, write_chi_plot_csv)
from .threshold import rolling_quantile_threshold, to_angular

__all__ = ["RunConfig", "main", "build_parser"]

log = logging.getLogger("geoextremes")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
DEFAULT_U_GRID = (0.9, 0.95, 0.99, 0.995, 0.999, 0.9995, 0.9999)


class ValidationError(ValueError):
    """Bad user input."""


@dataclass
class RunConfig:
    """Settings shared by all commands; a config file supplies defaults."""

    command: str = ""
    input: Optional[str] = None
    out: Optional[str] = None
    fit: Optional[str] = None
    tau: float = 0.95
    families: list = field(default_factory=list)
    seed: int = 0
    reps: int = 1
    n: int = 5000
    threads: int = 1
    u_grid: list = field(default_factory=lambda: list(DEFAULT_U_GRID))
    nsim: int = 1_000_000
    ranks: bool = False
    scenario: Optional[str] = None
    structure: Optional[str] = None
    region: Optional[list] = None
    params: dict = field(default_factory=dict)
    family: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_file(cls, path) -> dict:
        """Read a YAML or JSON mapping of field names to values."""
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if str(path).endswith(".json"):
            data = json.loads(text)
        else:
            import yaml
            data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: config must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")
        return data


# ---------------------------------------------------------------------------
# helpers


def _load_points(path: str, ranks: bool) -> np.ndarray:
    xy = read_dataset(path)
    if xy.shape[0] == 0:
        raise ValidationError(f"{path}: no data rows")
    if ranks:
        from scipy.stats import rankdata
        n = xy.shape[0]
        u = np.column_stack([rankdata(xy[:, j]) for j in range(2)]) / (n + 1.0)
        xy = -np.log1p(-u)
    if np.any(xy < 0):
        raise ValidationError("coordinates must be non-negative; use --ranks for raw data")
    return xy


def _families(cfg: RunConfig, default) -> list:
    fams = [f.lower() for f in (cfg.families or default)]
    for f in fams:
        if f not in FAMILIES:
            raise ValidationError(f"unknown family {f!r}; choose from {sorted(FAMILIES)}")
    return fams


def _outdir(cfg: RunConfig, default: str) -> str:
    path = cfg.out or default
    os.makedirs(path, exist_ok=True)
    return path


def _model(cfg: RunConfig):
    if not cfg.input or not cfg.fit:
        raise ValidationError("--input (data CSV) and --fit (fit JSON) are required")
    xy = _load_points(cfg.input, cfg.ranks)
    res = FitResult.from_json(cfg.fit)
    sample = to_angular(xy)
    th = rolling_quantile_threshold(sample, cfg.tau, sparse="expand")
    return FittedModel.from_fit(res, sample, th)


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands


def cmd_gen(cfg: RunConfig) -> int:
    if not cfg.scenario or not cfg.structure:
        raise ValidationError("--scenario and --structure are required")
    sc = find_scenario(cfg.scenario, cfg.structure)
    stream = RngStream(cfg.seed, stable_hash64(sc.name, sc.structure, "gen"))
    xy = sc.sample(cfg.n, stream)
    out = cfg.out or f"{sc.name}_{sc.structure}_n{cfg.n}_s{cfg.seed}.csv"
    meta = {"scenario": sc.name, "generator": sc.structure, "parameters": sc.params,
            "n": cfg.n, "seed": cfg.seed, "stream_id": stream.stream_id, "truth": sc.truth}
    write_dataset(xy, out, meta)
    print(out)
    return EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    if not cfg.input:
        raise ValidationError("--input is required")
    xy = _load_points(cfg.input, cfg.ranks)
    outdir = _outdir(cfg, "fits")
    sample = to_angular(xy)
    th = rolling_quantile_threshold(sample, cfg.tau, sparse="expand")
    th.to_csv(os.path.join(outdir, "threshold.csv"))
    exc = exceedances(sample, th)
    log.info("%d exceedances of %d points", len(exc), len(sample))
    rows = []
    for fam in _families(cfg, TABLE_FAMILIES):
        try:
            res = fit(exc, fam)
        except ArithmeticError as err:
            log.warning("%s: numerical failure: %s", fam, err)
            rows.append((fam, math.nan, math.nan, False, str(err)))
            continue
        res.to_json(os.path.join(outdir, f"fit_{fam}.json"))
        if not res.converged:
            log.warning("%s: %s", fam, res.message)
        rows.append((fam, res.nll, res.aic, res.converged, res.message))
    rows.sort(key=lambda r: (math.isnan(r[2]), r[2]))
    with open(os.path.join(outdir, "aic.csv"), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["rank", "family", "nll", "aic", "converged", "message"])
        for i, (fam, nll, aic, conv, msg) in enumerate(rows, 1):
            wr.writerow([i, fam, repr(nll), repr(aic), conv, msg])
    for i, (fam, nll, aic, conv, _) in enumerate(rows, 1):
        print(f"{i:2d} {fam:9s} aic={aic:.3f} converged={conv}")
    return EXIT_OK


def cmd_classify(cfg: RunConfig) -> int:
    path = cfg.fit or cfg.input
    if not path:
        raise ValidationError("--fit (fit JSON) is required")
    res = FitResult.from_json(path)
    g = res.gauge()
    verdict = classify(g).to_dict()
    verdict["family"] = res.family
    verdict["estimates"] = res.estimates
    verdict["eta"] = estimate_eta(g)
    verdict["kappa"] = estimate_kappa(g)
    text = json.dumps(verdict, indent=2)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_benchmark(cfg: RunConfig) -> int:
    scenarios = scenario_catalog()
    if cfg.scenario:
        scenarios = [s for s in scenarios if s.name == cfg.scenario or str(s.index) == cfg.scenario]
    if cfg.structure:
        scenarios = [s for s in scenarios if s.structure == cfg.structure]
    if not scenarios:
        raise ValidationError("no scenario matches the filters")
    report = run_benchmark(cfg.reps, cfg.n, cfg.tau, _families(cfg, DEFAULT_FAMILIES), cfg.seed,
                           scenarios, cfg.threads, progress=log.info)
    outdir = _outdir(cfg, "benchmark")
    report.write(os.path.join(outdir, "report"))
    for c in report.cells:
        print(f"{c.scenario:9s} {c.structure:18s} {c.family:8s} {c.metric:11s} "
              f"{c.rate:.3f} (se {c.se:.3f}, n={c.valid}, failed={c.failed})")
    for fam, v in report.overall().items():
        print(f"overall {fam}: {v:.3f}")
    return EXIT_OK


def cmd_levelset(cfg: RunConfig) -> int:
    if cfg.fit:
        g = FitResult.from_json(cfg.fit).gauge()
    elif cfg.family:
        spec = FAMILIES.get(cfg.family.lower())
        if spec is None:
            raise ValidationError(f"unknown family {cfg.family!r}")
        missing = set(spec.params) - set(cfg.params)
        if missing:
            raise ValidationError(f"missing --param for {sorted(missing)}")
        g = spec.build({k: float(v) for k, v in cfg.params.items()})
    else:
        raise ValidationError("give --fit or --family with --param name=value")
    out = cfg.out or "levelset.csv"
    write_level_set_csv(g, out)
    print(out)
    return EXIT_OK


def cmd_chiplot(cfg: RunConfig) -> int:
    model = _model(cfg)
    rows = chi_plot(model, cfg.u_grid, cfg.nsim, RngStream(cfg.seed, stable_hash64("chiplot")))
    out = cfg.out or "chiplot.csv"
    write_chi_plot_csv(rows, out)
    for u, chi, se, note in rows:
        print(f"u={u:<8g} chi_m={chi:.4f} se={se:.4f} {note}")
    return EXIT_OK


def cmd_prob(cfg: RunConfig) -> int:
    if not cfg.region or len(cfg.region) != 4:
        raise ValidationError("--region x_lo x_hi y_lo y_hi is required")
    model = _model(cfg)
    region = RegionSpec(*map(float, cfg.region))
    est = estimate_region_prob(model, region, cfg.nsim, RngStream(cfg.seed, stable_hash64("prob")))
    text = json.dumps(asdict(est), indent=2)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "fit": cmd_fit, "classify": cmd_classify, "benchmark": cmd_benchmark,
            "levelset": cmd_levelset, "chiplot": cmd_chiplot, "prob": cmd_prob}


# ---------------------------------------------------------------------------
# argument parsing


def _param(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected name=value")
    k, v = text.split("=", 1)
    return k.strip(), float(v)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON file with default settings")
    common.add_argument("--input", help="input CSV (x,y) or JSON")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--fit", help="fit JSON written by the fit command")
    common.add_argument("--tau", type=float, help="threshold quantile level (default 0.95)")
    common.add_argument("--family", dest="families", action="append",
                        help="gauge family; repeatable (" + "|".join(TABLE_FAMILIES) + ")")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--reps", type=int, help="benchmark replications")
    common.add_argument("--n", type=int, help="sample size")
    common.add_argument("--threads", type=int, help="worker processes for the benchmark")
    common.add_argument("--ranks", action="store_true", default=None,
                        help="rank-transform input columns to exponential margins")
    common.add_argument("--scenario", help="scenario name or index, e.g. st.d.AD")
    common.add_argument("--structure", help="logistic|dirichlet|inverted_logistic|gaussian")
    common.add_argument("--u", dest="u_grid", type=float, action="append",
                        help="u value for chiplot; repeatable")
    common.add_argument("--nsim", type=int, help="conditional simulations")
    common.add_argument("--region", type=float, nargs=4, metavar=("XLO", "XHI", "YLO", "YHI"),
                        help="rectangle for prob; use inf for unbounded sides")
    common.add_argument("--param", dest="params", type=_param, action="append",
                        help="gauge parameter name=value for levelset")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="geoextremes", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=func.__name__.replace("cmd_", ""))
    return parser


def _config_from_args(args) -> RunConfig:
    values = {}
    if args.config:
        values.update(RunConfig.from_file(args.config))
    given = {k: v for k, v in vars(args).items() if v is not None}
    given.pop("config", None)
    given.pop("verbose", None)
    if "families" in given and args.families:
        given["families"] = args.families
    if "params" in given:
        given["params"] = dict(given["params"])
    values.update(given)
    values["command"] = args.command
    # a single family also serves levelset
    fams = values.get("families") or []
    if isinstance(fams, str):
        fams = [fams]
        values["families"] = fams
    if fams and not values.get("family"):
        values["family"] = fams[0]
    cfg = RunConfig(**values)
    if not 0.5 < cfg.tau < 1.0:
        raise ValidationError("--tau must lie in (0.5, 1)")
    if cfg.n < 1 or cfg.reps < 1 or cfg.threads < 1 or cfg.nsim < 1:
        raise ValidationError("--n, --reps, --threads and --nsim must be positive")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except (ArithmeticError, NumericError) as err:
        print(f"error: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
