import math

import numpy as np
import pytest
from scipy import integrate, stats

import oracles
from geoextremes.gauges import Gaussian, InvertedLogistic, Logistic, MaxMin, PointwiseMin
from geoextremes.inference import exceedances, fit
from geoextremes.mixtures import gauss_logistic, kappa_gauss_logistic
from geoextremes.special_math import RngStream
from geoextremes.synth import sample_inverted_logistic, sample_logistic_copula
from geoextremes.tail_sim import (ExceedanceRegion, FittedModel, RegionSpec,
                                  UnreachableRegionError, angle_weights, chi_plot,
                                  estimate_chi_m, estimate_eta, estimate_kappa,
                                  estimate_region_prob, estimate_region_probs, largest_k,
                                  simulate_conditional, write_chi_plot_csv)
from geoextremes.threshold import ThresholdFunction, rolling_quantile_threshold, to_angular


def toy_model(gauge=Logistic(0.4), lam=2.0, n_angles=400, p_exceed=0.05, level=3.0):
    w = np.random.default_rng(0).uniform(0.02, 0.98, n_angles)
    th = ThresholdFunction(np.array([0.0, 0.5, 1.0]), np.array([level, level * 0.8, level]))
    return FittedModel(gauge, lam, th, w, p_exceed)


def fitted(sampler, par, seed, family, n=5000):
    xy = sampler(n, par, RngStream(70, seed))
    s = to_angular(xy)
    th = rolling_quantile_threshold(s, 0.95, sparse="expand")
    res = fit(exceedances(s, th), family)
    return FittedModel.from_fit(res, s, th)


def test_model_validation():
    th = ThresholdFunction(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        FittedModel(Logistic(0.5), 2.0, th, np.array([]), 0.05)
    with pytest.raises(ValueError):
        FittedModel(Logistic(0.5), 2.0, th, np.array([0.5]), 1.0)
    with pytest.raises(ValueError):
        FittedModel(Logistic(0.5), 0.0, th, np.array([0.5]), 0.05)


def test_unit_level_weights_are_uniform():
    m = toy_model()
    assert np.array_equal(angle_weights(m, 1.0), np.ones(400))
    w = angle_weights(m, 1.7)
    assert np.all((w > 0) & (w < 1))
    with pytest.raises(ValueError):
        angle_weights(m, 0.5)


@pytest.mark.parametrize("k", [1.0, 1.5, 3.0])
def test_simulated_points_respect_scaled_threshold(k):
    m = toy_model()
    pts = simulate_conditional(m, k, 20_000, RngStream(1))
    r = pts.sum(axis=1)
    assert np.all(r > k * m.threshold(pts[:, 0] / r))
    assert np.all(pts >= 0)


def test_radial_mean_ratio_matches_quadrature():
    g, lam = Logistic(0.4), 2.0
    m = toy_model(g, lam, n_angles=15)
    n = 100_000
    pts = simulate_conditional(m, 1.0, n, RngStream(2))
    r = pts.sum(axis=1)
    ratio = r / m.threshold(pts[:, 0] / r)

    def mean_ratio(w):
        t, beta = float(m.threshold(w)), float(g(w, 1.0 - w))
        dens = lambda x: stats.gamma.pdf(x, lam, scale=1.0 / beta)
        num = integrate.quad(lambda x: x * dens(x), t, np.inf)[0]
        return num / (t * stats.gamma.sf(t, lam, scale=1.0 / beta))

    # uniform weights at k = 1: the oracle is the plain average over angles
    oracle = np.mean([mean_ratio(w) for w in m.exceedance_angles])
    assert abs(ratio.mean() - oracle) < 3 * ratio.std() / math.sqrt(n)


def test_full_exceedance_region_has_total_mass():
    m = toy_model()
    region = ExceedanceRegion(m.threshold, 1.0)
    w = np.linspace(0, 1, 11)
    assert np.array_equal(region.entry_radius(w), m.threshold(w))
    pts = simulate_conditional(m, 1.0, 50_000, RngStream(3))
    assert np.all(region.contains(pts[:, 0], pts[:, 1]))
    assert m.p_exceed == pytest.approx(0.05)


def test_largest_k_is_tight():
    m = toy_model()
    reg = RegionSpec(9.0, math.inf, 9.0, math.inf)
    k = largest_k(m, reg)
    # the corner (9, 9) sits on the diagonal where the threshold is 2.4
    assert k == pytest.approx(18.0 / 2.4, rel=1e-8)
    assert k < 18.0 / 2.4
    pts = simulate_conditional(m, 1.0, 5000, RngStream(4))
    inside = reg.contains(pts[:, 0], pts[:, 1])
    r = pts.sum(axis=1)
    assert np.all(r[inside] > k * m.threshold(pts[inside, 0] / r[inside]))


def test_region_below_threshold_is_unreachable():
    m = toy_model()
    with pytest.raises(UnreachableRegionError):
        estimate_region_prob(m, RegionSpec(0.5, math.inf, 0.5, math.inf), 1000, RngStream(5))
    with pytest.raises(UnreachableRegionError):
        estimate_region_prob(m, RegionSpec(9.0, math.inf, 9.0, math.inf), 1000, RngStream(5), k=50.0)


def test_vanishing_weights_raise():
    m = toy_model(lam=0.5)
    with pytest.raises(UnreachableRegionError):
        simulate_conditional(m, 1e6, 10, RngStream(6))


def test_disjoint_additivity():
    m = toy_model()
    a = RegionSpec(5.0, 8.0, 5.0, math.inf)
    b = RegionSpec(8.0, math.inf, 5.0, math.inf)
    union = RegionSpec(5.0, math.inf, 5.0, math.inf)
    k = min(largest_k(m, r) for r in (a, b, union))
    pa, pb, pu = estimate_region_probs(m, [a, b, union], 400_000, RngStream(7), k=k)
    # shared draws: the union's hits are exactly the sum
    assert pu.hits == pa.hits + pb.hits
    sa, sb = (estimate_region_prob(m, r, 400_000, RngStream(8, i), k=k)
              for i, r in enumerate((a, b)))
    joint = math.sqrt(sa.se ** 2 + sb.se ** 2 + pu.se ** 2)
    assert abs(sa.prob + sb.prob - pu.prob) < 3 * joint


@pytest.mark.parametrize("region", [RegionSpec(4.0, math.inf, 4.0, math.inf),
                                    RegionSpec(6.0, math.inf, 0.0, 3.0),
                                    RegionSpec(3.0, 7.0, 3.0, 7.0)], ids=repr)
def test_extrapolation_consistency(region):
    m = toy_model()
    k = largest_k(m, region)
    assert k > 1.0
    at_one = estimate_region_prob(m, region, 1_000_000, RngStream(9), k=1.0)
    at_k = estimate_region_prob(m, region, 1_000_000, RngStream(10))
    assert at_k.k == pytest.approx(k)
    joint = math.sqrt(at_one.se ** 2 + at_k.se ** 2)
    assert abs(at_one.prob - at_k.prob) < 3 * joint


def test_extrapolation_shrinks_standard_error():
    m = toy_model()
    region = RegionSpec(6.0, math.inf, 6.0, math.inf)
    at_one = estimate_region_prob(m, region, 200_000, RngStream(11), k=1.0)
    at_k = estimate_region_prob(m, region, 200_000, RngStream(12))
    assert at_k.se < at_one.se


def test_estimates_are_reproducible():
    m = toy_model()
    reg = RegionSpec(5.0, math.inf, 5.0, math.inf)
    a = estimate_region_prob(m, reg, 10_000, RngStream(13))
    b = estimate_region_prob(m, reg, 10_000, RngStream(13))
    assert a == b


@pytest.mark.slow
def test_corner_set_against_exact_copula_probability():
    exact = oracles.logistic_rect_prob(8.0, math.inf, 0.0, 7.0, 0.4)
    band = 1.96 * math.sqrt(exact * (1 - exact) / 1e7)  # brute force with 1e7 draws
    region = RegionSpec(8.0, math.inf, 0.0, 7.0)
    est = [estimate_region_prob(fitted(sample_logistic_copula, 0.4, rep, "logistic"), region,
                                200_000, RngStream(71, rep)).prob for rep in range(20)]
    # single fits at n = 5000 scatter far more than the band, hence the median
    assert abs(np.median(est) - exact) < band


@pytest.mark.parametrize("u", [0.99, 0.999, 0.9999])
def test_chi_m_in_unit_interval(u):
    m = toy_model()
    chi, se = estimate_chi_m(m, u, 50_000, RngStream(14), with_se=True)
    assert 0.0 <= chi <= 1.0 and se >= 0.0


def test_chi_m_near_perfect_dependence():
    m = toy_model(MaxMin(0.01))
    assert estimate_chi_m(m, 0.9999, 100_000, RngStream(15)) > 0.97


def test_chi_m_rejects_bad_level():
    with pytest.raises(ValueError):
        estimate_chi_m(toy_model(), 1.0, 100, RngStream(16))


def test_chi_plot_rows_and_csv(tmp_path):
    m = toy_model()
    rows = chi_plot(m, [0.5, 0.99, 0.999], 20_000, RngStream(17))
    assert math.isnan(rows[0][1]) and rows[0][3]
    assert all(0.0 <= r[1] <= 1.0 for r in rows[1:])
    path = tmp_path / "chi.csv"
    write_chi_plot_csv(rows, path)
    assert path.read_text().splitlines()[0] == "u,chi_m_hat,mc_se,note"


@pytest.mark.slow
def test_inverted_logistic_fits_extrapolate_to_independence():
    small = 0
    for rep in range(20):
        m = fitted(sample_inverted_logistic, 0.8, rep, "mm")
        small += estimate_chi_m(m, 0.9999, 200_000, RngStream(72, rep)) < 0.05
    assert small >= 18


@pytest.mark.slow
def test_chi_m_decreases_in_u_for_independent_fits():
    down = 0
    for rep in range(10):
        m = fitted(sample_inverted_logistic, 0.5, rep, "mm")
        a = estimate_chi_m(m, 0.999, 200_000, RngStream(73, rep))
        b = estimate_chi_m(m, 0.9999, 200_000, RngStream(74, rep))
        down += b <= a
    assert down >= 8


@pytest.mark.parametrize("g, expected", [
    (Logistic(0.4), 1.0),
    (Gaussian(0.74), 0.87),
    (Gaussian(0.14), 0.57),
    (InvertedLogistic(0.2), 2 ** -0.2),
    (InvertedLogistic(0.8), 2 ** -0.8),
], ids=repr)
def test_eta_targets(g, expected):
    assert estimate_eta(g) == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize("g, expected", [(Logistic(0.4), 1.0),
                                         (PointwiseMin(Logistic(0.5), Logistic(0.99)), 1.0)],
                         ids=repr)
def test_kappa_pointy(g, expected):
    assert estimate_kappa(g) == pytest.approx(expected, abs=1e-6)


def test_kappa_independence():
    # θ = 1 gives x + y
    assert estimate_kappa(InvertedLogistic(1.0)) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("p, rho, gamma", [(0.5, 0.5, 0.5), (0.9, 0.5, 0.5), (0.3, 0.2, 0.7),
                                           (0.8, 0.9, 0.3)])
def test_kappa_matches_closed_form_for_gauss_logistic(p, rho, gamma):
    g = gauss_logistic(p, rho, gamma)
    assert estimate_kappa(g) == pytest.approx(kappa_gauss_logistic(p, rho, gamma), abs=1e-4)
