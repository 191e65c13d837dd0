import math
from dataclasses import dataclass

import numpy as np
import pytest

from geoextremes.gauges import Gauge, Logistic, MaxMin
from geoextremes.inference import (FAMILIES, LAMBDA_START, Exceedances, FitResult,
                                   InsufficientExceedancesError, exceedances, fit, ks_distance,
                                   negloglik, pp_points)
from geoextremes.special_math import RngStream, sample_trunc_gamma
from geoextremes.synth import sample_logistic_copula
from geoextremes.threshold import rolling_quantile_threshold, to_angular


@dataclass(frozen=True)
class ConstantRate(Gauge):
    """``β (x + y)``: rate β along every angle."""

    beta: float

    def _eval(self, x, y):
        return self.beta * (x + y)


def simulate(gauge, lam, t, n, stream):
    """Exceedances drawn from the truncated-gamma model with uniform angles."""
    rng = stream.generator()
    w = rng.uniform(0.0, 1.0, n)
    rate = gauge(w, 1.0 - w)
    r = sample_trunc_gamma(rng, shape=lam, rate=rate, lower=np.full(n, t))
    return Exceedances(r, w, np.full(n, t))


def test_single_record_hand_value():
    # unit rate at w = 1/2: -[ln 2 - 2 - ln(2 e^{-1})] = 1
    exc = Exceedances(np.array([2.0]), np.array([0.5]), np.array([1.0]))
    assert negloglik({"lambda": 2.0, "beta": 1.0}, exc, ConstantRate) == pytest.approx(1.0, abs=1e-12)


def test_single_record_logistic_hand_value():
    # homogeneity gives rate g(1/2, 1/2) = 1/2; survival at 1 is 1.5 e^{-1/2}
    exc = Exceedances(np.array([2.0]), np.array([0.5]), np.array([1.0]))
    expected = math.log(2.0) + 0.5 + math.log(1.5)
    v = negloglik({"lambda": 2.0, "gamma": 0.5}, exc, lambda gamma: Logistic(gamma))
    assert v == pytest.approx(expected, abs=1e-12)
    assert negloglik({"lambda": 2.0, "gamma": 0.5}, exc, "logistic") == pytest.approx(expected, abs=1e-12)


def test_unit_shape_reduces_to_shifted_exponential():
    rng = np.random.default_rng(4)
    t, beta = 2.5, 1.7
    r = t + rng.exponential(size=200) + 1e-9
    w = rng.uniform(size=200)
    exc = Exceedances(r, w, np.full(200, t))
    v = negloglik({"lambda": 1.0, "beta": beta}, exc, ConstantRate)
    assert v == pytest.approx(np.sum(beta * (r - t) - math.log(beta)), rel=1e-12)


def test_negloglik_permutation_invariant():
    exc = simulate(Logistic(0.4), 2.0, 3.0, 300, RngStream(1))
    perm = np.random.default_rng(0).permutation(300)
    shuffled = Exceedances(exc.r[perm], exc.w[perm], exc.t[perm])
    params = {"lambda": 1.8, "theta": 0.6}
    assert negloglik(params, exc, "mm") == pytest.approx(negloglik(params, shuffled, "mm"),
                                                         rel=1e-13)


def test_invalid_parameters_give_infinity():
    exc = simulate(Logistic(0.4), 2.0, 3.0, 50, RngStream(1))
    assert negloglik({"lambda": 2.0, "gamma": 1.5}, exc, "logistic") == math.inf
    assert negloglik({"lambda": -1.0, "gamma": 0.5}, exc, "logistic") == math.inf
    assert negloglik({"lambda": 2.0, "beta": 0.0}, exc, ConstantRate) == math.inf


def test_truth_beats_perturbation_on_most_datasets():
    wins = 0
    for rep in range(10):
        exc = simulate(Logistic(0.4), 2.0, 3.0, 250, RngStream(10, rep))
        truth = negloglik({"lambda": 2.0, "gamma": 0.4}, exc, "logistic")
        off = negloglik({"lambda": 2.6, "gamma": 0.55}, exc, "logistic")
        wins += truth < off
    assert wins >= 6


def test_default_start_and_family_table():
    assert LAMBDA_START == 2.0
    for name in ("expga", "expinv", "exprect", "galog", "invlog", "rectlog", "mm"):
        assert len(FAMILIES[name].starts) == 3


@pytest.mark.parametrize("theta", [0.5, 2.0])
def test_maxmin_parameter_recovery(theta):
    estimates = []
    for rep in range(100):
        exc = simulate(MaxMin(theta), 2.0, 3.0, 250, RngStream(20, rep))
        res = fit(exc, "mm")
        assert res.converged
        estimates.append(res.estimates["theta"])
    assert abs(np.median(estimates) - theta) / theta < 0.10


def test_pit_uniform_for_well_specified_fits():
    passes = 0
    for rep in range(100):
        exc = simulate(MaxMin(0.5), 2.0, 3.0, 250, RngStream(30, rep))
        u = pp_points(fit(exc, "mm"), exc)[:, 0]
        passes += ks_distance(u) < 1.36 / math.sqrt(len(exc))
    assert passes >= 90


def test_misspecified_fit_has_larger_ks_distance():
    worse = 0
    for rep in range(100):
        exc = simulate(Logistic(0.3), 2.0, 3.0, 250, RngStream(40, rep))
        good = ks_distance(pp_points(fit(exc, "logistic"), exc)[:, 0])
        bad = ks_distance(pp_points(fit(exc, "indep"), exc)[:, 0])
        worse += bad > good
    assert worse >= 90


def test_pp_points_single_record():
    exc = Exceedances(np.array([2.0]), np.array([0.5]), np.array([1.0]))
    res = FitResult("logistic", {"lambda": 2.0, "gamma": 0.5}, 1.0, 6.0, True, 1, 1)
    pts = pp_points(res, exc)
    assert pts.shape == (1, 2)
    # F(2 | R > 1) for Gamma(2, 1/2): 1 - 2e^{-1} / 1.5e^{-1/2}
    assert pts[0, 0] == pytest.approx(1.0 - (4.0 / 3.0) * math.exp(-0.5), abs=1e-12)
    assert pts[0, 1] == 0.5


def test_degenerate_angles_never_converge_silently():
    r = 3.0 + np.random.default_rng(0).exponential(size=100)
    exc = Exceedances(r, np.full(100, 0.5), np.full(100, 3.0))
    res = fit(exc, "mm")
    assert not res.converged or res.boundary
    assert "angle" in res.message


def test_too_few_exceedances():
    exc = simulate(Logistic(0.4), 2.0, 3.0, 25, RngStream(2))
    with pytest.raises(InsufficientExceedancesError):
        fit(exc, "galog")
    with pytest.raises(ValueError):
        fit(exc, "nope")


def test_fit_result_consistency_determinism_and_json(tmp_path):
    exc = simulate(Logistic(0.4), 2.0, 3.0, 300, RngStream(3))
    a = fit(exc, "expga", standard_errors=True)
    b = fit(exc, "expga", standard_errors=True)
    assert a.to_dict() == b.to_dict()
    assert a.aic == pytest.approx(2 * 3 + 2 * a.nll, rel=1e-14)
    assert 0.1 <= a.estimates["lambda"] <= 20
    assert 0.0 <= a.estimates["rho"] < 1.0 and a.estimates["gamma"] > 0
    assert set(a.standard_errors) == {"lambda", "gamma", "rho"}
    path = tmp_path / "fit.json"
    a.to_json(path)
    back = FitResult.from_json(path)
    assert back.to_dict() == a.to_dict()
    assert back.gauge() == a.gauge()


def test_ties_are_dropped_at_ingestion():
    s = to_angular([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    from geoextremes.threshold import ThresholdFunction
    th = ThresholdFunction(np.array([0.0, 1.0]), np.array([4.0, 4.0]))
    exc = exceedances(s, th)
    assert list(exc.r) == [6.0]
    with pytest.raises(ValueError):
        Exceedances(np.array([4.0]), np.array([0.5]), np.array([4.0]))


@pytest.mark.slow
def test_maxmin_aic_competitive_on_logistic_data():
    wins = 0
    for rep in range(100):
        xy = sample_logistic_copula(5000, 0.4, RngStream(50, rep))
        s = to_angular(xy)
        exc = exceedances(s, rolling_quantile_threshold(s, 0.95, sparse="expand"))
        mm = fit(exc, "mm").aic
        mixes = [fit(exc, fam).aic for fam in ("galog", "invlog", "rectlog")]
        wins += sum(mm <= a for a in mixes) >= 2
    assert wins >= 60
