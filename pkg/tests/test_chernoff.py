"""Chernoff optimization tests against closed forms and frozen oracles.

Oracle provenance: the Gaussian, Poissonian and binary cumulant generating
functions have elementary closed forms; the Poisson(4, 1), Cauchy(0.5) and
small-signal numbers were computed independently with scipy.integrate.quad
plus scipy.optimize on the defining integrals and frozen here.
"""

import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qndreadout import chernoff as chern
from qndreadout import distributions as dist

RNG_SEED = 91


def gaussian_cgf(r, s):
    return -2.0 * r * s * (1.0 - s)


def poisson_cgf(mu_p, mu_m, s):
    return mu_p**s * mu_m ** (1.0 - s) - s * mu_p - (1.0 - s) * mu_m


def binary_cgf(eps_p, eps_m, s):
    return math.log((1.0 - eps_p) ** s * eps_m ** (1.0 - s)
                    + eps_p**s * (1.0 - eps_m) ** (1.0 - s))


# ---------------------------------------------------------------------------
# cumulant generating function


def test_cgf_gaussian_closed_form():
    for r in (0.3, 1.0, 5.0):
        pair = dist.gaussian_pair(r)
        for s in (0.1, 0.25, 0.5, 0.9):
            ev = chern.cgf(pair, s)
            assert ev.s == s
            assert_allclose(ev.k_minus, gaussian_cgf(r, s), rtol=1e-9, atol=1e-12)
    # the symmetric point: K(1/2) = -r/2, i.e. minus the Bhattacharyya distance
    assert_allclose(chern.cgf(dist.gaussian_pair(1.0), 0.5).k_minus, -0.5,
                    rtol=1e-10)


def test_cgf_poisson_closed_form():
    pair = dist.poissonian_pair(4.0, 1.0)
    for s in (0.05, 0.3, 0.5, 0.75, 0.95):
        assert_allclose(chern.cgf(pair, s).k_minus, poisson_cgf(4.0, 1.0, s),
                        rtol=1e-12)


def test_cgf_binary_closed_form():
    pair = dist.binary_pair(0.25, 0.05)
    for s in (0.2, 0.5, 0.8):
        assert_allclose(chern.cgf(pair, s).k_minus, binary_cgf(0.25, 0.05, s),
                        rtol=1e-12)


def test_cgf_endpoints_vanish():
    pairs = [
        dist.gaussian_pair(2.0),
        dist.poissonian_pair(3.0, 0.5),
        dist.binary_pair(0.4, 0.1),
        dist.cauchy_pair(0.6),
        dist.gaussian_mixture_pair([0.2, 0.8], [-1.0, 0.5], [0.5, 1.2],
                                   [1.0], [-0.3], [0.8]),
    ]
    # a zero-count bin exercises the 0 * log(0) endpoint handling
    centers = np.linspace(-2.0, 2.0, 15)
    cp = np.ones(15)
    cp[0] = 0.0
    pairs.append(dist.empirical_pair(centers, cp, np.ones(15)))
    for pair in pairs:
        assert_allclose(chern.cgf(pair, 0.0).k_minus, 0.0, atol=1e-9)
        assert_allclose(chern.cgf(pair, 1.0).k_minus, 0.0, atol=1e-9)


def test_cgf_convex_in_s():
    pairs = [
        dist.gaussian_pair(1.5),
        dist.poissonian_pair(4.0, 1.0),
        dist.gaussian_mixture_pair([0.5, 0.5], [-0.2, 1.0], [0.6, 1.0],
                                   [0.7, 0.3], [-1.0, 0.4], [0.9, 0.5]),
    ]
    s_grid = np.linspace(0.0, 1.0, 101)
    for pair in pairs:
        k = np.array([chern.cgf(pair, s).k_minus for s in s_grid])
        assert np.all(np.diff(k, 2) > -1e-9)
        assert np.all(k[1:-1] < 1e-12)


def test_cgf_domain():
    with pytest.raises(ValueError):
        chern.cgf(dist.gaussian_pair(1.0), -0.1)
    with pytest.raises(ValueError):
        chern.cgf(dist.gaussian_pair(1.0), 1.1)


# ---------------------------------------------------------------------------
# Chernoff summaries


def test_gaussian_summary():
    for r in (0.4, 1.0, 7.0):
        s = chern.chernoff_information(dist.gaussian_pair(r))
        assert_allclose(s.c, r / 2.0, rtol=1e-9)
        assert_allclose(s.s_star, 0.5, atol=1e-6)
        assert_allclose(s.alpha, 1.0, rtol=1e-7)
        assert_allclose(s.k2, 4.0 * r, rtol=1e-8)
        assert_allclose(s.bhattacharyya, r / 2.0, rtol=1e-9)
        assert not s.degenerate and not s.boundary


def test_symmetric_binary_summary():
    eps = 0.2
    s = chern.chernoff_information(dist.binary_pair(eps, eps))
    assert_allclose(s.c, -0.5 * math.log(4.0 * eps * (1.0 - eps)), rtol=1e-9)
    assert_allclose(s.s_star, 0.5, atol=1e-6)
    assert_allclose(s.bhattacharyya, s.c, rtol=1e-9)
    # K''(s*) against a central second difference of the cgf
    h = 1e-4
    pair = dist.binary_pair(eps, eps)
    fd = (chern.cgf(pair, 0.5 + h).k_minus - 2.0 * chern.cgf(pair, 0.5).k_minus
          + chern.cgf(pair, 0.5 - h).k_minus) / h**2
    assert_allclose(s.k2, fd, rtol=1e-5)


def test_poisson_summary_frozen():
    s = chern.chernoff_information(dist.poissonian_pair(4.0, 1.0))
    assert_allclose(s.c, 0.506550749165636, rtol=1e-10)
    assert_allclose(s.s_star, 0.556864436833027, atol=1e-6)
    assert_allclose(s.alpha, 0.999898511538441, rtol=1e-6)
    assert_allclose(s.k2, 4.15888308335967, rtol=1e-6)
    # -K(1/2) = (mu_p + mu_m)/2 - sqrt(mu_p mu_m) = 1/2 exactly here
    assert_allclose(s.bhattacharyya, 0.5, rtol=1e-10)
    # k2 equals the closed-form second derivative at the optimizer
    assert_allclose(s.k2, 4.0**s.s_star * math.log(4.0) ** 2, rtol=1e-8)


def test_cauchy_summary_frozen():
    s = chern.chernoff_information(dist.cauchy_pair(0.5))
    assert_allclose(s.c, 0.442174194472, rtol=1e-8)
    assert_allclose(s.s_star, 0.5, atol=1e-6)
    assert_allclose(s.alpha, 1.10790594702, rtol=1e-7)
    assert_allclose(s.bhattacharyya, s.c, rtol=1e-9)
    # four-decimal consilience with independently published values
    assert round(s.c, 4) == 0.4422
    assert round(s.alpha, 4) == 1.1079


def test_degenerate_pair_flagged():
    pair = dist.gaussian_mixture_pair([1.0], [0.4], [1.1], [1.0], [0.4], [1.1])
    with pytest.warns(chern.DegeneratePairWarning):
        s = chern.chernoff_information(pair)
    assert s.degenerate
    assert s.c == 0.0
    assert s.s_star == 0.5
    assert s.bhattacharyya == 0.0
    assert math.isnan(s.alpha)


def test_boundary_optimum_flagged():
    # P_plus is a point mass at 0, so K(s) -> ln P_minus(0) as s -> 0+ while
    # K(0) = 0: the infimum sits at the boundary and alpha is undefined
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        s = chern.chernoff_information(dist.poissonian_pair(0.0, 1.0))
    assert s.boundary
    assert math.isnan(s.alpha)
    assert_allclose(s.c, 1.0, rtol=1e-4)


def test_swap_symmetry():
    pair = dist.poissonian_pair(4.0, 1.0)
    a = chern.chernoff_information(pair)
    b = chern.chernoff_information(pair.swapped())
    assert_allclose(b.c, a.c, rtol=1e-9)
    assert_allclose(b.s_star, 1.0 - a.s_star, atol=1e-6)
    assert_allclose(b.bhattacharyya, a.bhattacharyya, rtol=1e-9)
    assert_allclose(b.alpha, a.alpha, rtol=1e-6)


def test_reparameterization_invariance():
    # an affine change of outcome units must not move any summary number
    a, b, r = 2.7, -1.3, 0.8
    sigma = 1.0 / math.sqrt(r)
    base = dist.gaussian_mixture_pair([1.0], [1.0], [sigma],
                                      [1.0], [-1.0], [sigma])
    mapped = dist.gaussian_mixture_pair([1.0], [a + b], [a * sigma],
                                        [1.0], [-a + b], [a * sigma])
    sa = chern.chernoff_information(base)
    sb = chern.chernoff_information(mapped)
    assert_allclose(sb.c, sa.c, rtol=1e-8)
    assert_allclose(sb.s_star, sa.s_star, atol=1e-6)
    assert_allclose(sb.alpha, sa.alpha, rtol=1e-7)
    assert_allclose(sb.k2, sa.k2, rtol=1e-7)


def test_bhattacharyya_bound_chain():
    pairs = [
        dist.gaussian_pair(1.0),
        dist.poissonian_pair(4.0, 1.0),
        dist.binary_pair(0.3, 0.05),
        dist.cauchy_pair(0.5),
        dist.gaussian_mixture_pair([0.6, 0.4], [0.2, 0.5], [0.75, 0.8],
                                   [0.75, 0.25], [0.7, 0.3], [0.8, 0.3]),
    ]
    for pair in pairs:
        s = chern.chernoff_information(pair)
        assert s.c / 2.0 - 1e-12 <= s.bhattacharyya <= s.c + 1e-12


def test_json_dict_keys():
    d = chern.chernoff_information(dist.gaussian_pair(1.0)).to_json_dict()
    assert set(d) == {"C", "s_star", "alpha", "k2", "bhattacharyya",
                      "s_tol", "degenerate", "boundary"}
    assert_allclose(d["C"], 0.5, rtol=1e-9)


# ---------------------------------------------------------------------------
# tilted (effective) distribution


def test_tilted_gaussian_is_centered_normal():
    r = 1.6
    eff = chern.effective_distribution(dist.gaussian_pair(r), 0.5)
    o = np.linspace(-3.0, 3.0, 61)
    sigma = 1.0 / math.sqrt(r)
    expected = (-0.5 * (o / sigma) ** 2 - math.log(sigma)
                - 0.5 * math.log(2.0 * math.pi))
    assert_allclose(eff.log_density(o), expected, rtol=1e-9, atol=1e-9)


def test_tilted_symmetric_binary_is_uniform():
    eff = chern.effective_distribution(dist.binary_pair(0.2, 0.2), 0.5)
    assert_allclose(eff.log_mass(np.array([1.0, -1.0])),
                    [-math.log(2.0)] * 2, rtol=1e-12)


def test_tilted_mean_ratio_vanishes_at_optimizer():
    # the saddle-point condition: E_eff[lambda] = 0 at s_star
    pairs = [
        dist.poissonian_pair(4.0, 1.0),
        dist.binary_pair(0.3, 0.05),
        dist.gaussian_mixture_pair([0.6, 0.4], [0.2, 0.5], [0.75, 0.8],
                                   [0.75, 0.25], [0.7, 0.3], [0.8, 0.3]),
    ]
    from qndreadout._integrate import weighted_moments
    for pair in pairs:
        s = chern.chernoff_information(pair)
        eff = chern.effective_distribution(pair, s.s_star)
        if pair.enumerable:
            grid, lp, lm = pair.enumerated()
            w = np.exp(eff.log_mass(grid))
            mean = float(np.sum(np.where(w > 0, (lp - lm), 0.0) * w))
        else:
            _, (mean,) = weighted_moments(
                eff.log_density, pair.log_likelihood_ratio, (1,),
                landmarks=pair.landmarks)
        assert abs(mean) < 1e-7


def test_tilted_normalized():
    from qndreadout._integrate import log_integral
    pair = dist.cauchy_pair(0.7)
    eff = chern.effective_distribution(pair, 0.37)
    assert_allclose(log_integral(eff.log_density, landmarks=pair.landmarks),
                    0.0, atol=1e-8)
    grid, _, _ = dist.poissonian_pair(3.0, 1.0).enumerated()
    eff_d = chern.effective_distribution(dist.poissonian_pair(3.0, 1.0), 0.4)
    assert_allclose(np.exp(eff_d.log_mass(grid)).sum(), 1.0, rtol=1e-10)


def test_tilted_domain():
    with pytest.raises(ValueError):
        chern.TiltedDensity(dist.gaussian_pair(1.0), 0.0)
    with pytest.raises(ValueError):
        chern.TiltedDensity(dist.gaussian_pair(1.0), 1.0)


def test_tilted_sampling_continuous():
    from scipy import stats
    r = 2.0
    eff = chern.effective_distribution(dist.gaussian_pair(r), 0.5)
    draws = eff.sample(np.random.default_rng(RNG_SEED), size=20_000)
    _, p = stats.kstest(draws, stats.norm(0.0, 1.0 / math.sqrt(r)).cdf)
    assert p > 1e-3


def test_tilted_sampling_enumerable():
    pair = dist.poissonian_pair(4.0, 1.0)
    eff = chern.effective_distribution(pair, 0.5)
    draws = eff.sample(np.random.default_rng(RNG_SEED), size=50_000)
    grid = eff.outcomes()
    mean = float(np.sum(grid * np.exp(eff.log_mass(grid))))
    var = float(np.sum(grid**2 * np.exp(eff.log_mass(grid)))) - mean**2
    assert abs(draws.mean() - mean) < 5.0 * math.sqrt(var / draws.size)


# ---------------------------------------------------------------------------
# cumulants


def test_gaussian_cumulants():
    r = 1.3
    k2, k3, k4 = chern.cumulants_under_eff(dist.gaussian_pair(r), 0.5)
    assert_allclose(k2, 4.0 * r, rtol=1e-8)
    assert_allclose(k3, 0.0, atol=1e-6)
    assert_allclose(k4, 0.0, atol=1e-5)


def test_binary_k2_matches_finite_difference():
    pair = dist.binary_pair(0.3, 0.1)
    s0 = 0.45
    (k2,) = chern.cumulants_under_eff(pair, s0, 2)
    h = 1e-4
    fd = (binary_cgf(0.3, 0.1, s0 + h) - 2.0 * binary_cgf(0.3, 0.1, s0)
          + binary_cgf(0.3, 0.1, s0 - h)) / h**2
    assert_allclose(k2, fd, rtol=1e-5)


def test_cumulants_domain():
    with pytest.raises(ValueError):
        chern.cumulants_under_eff(dist.gaussian_pair(1.0), 0.5, 5)
    with pytest.raises(ValueError):
        chern.cumulants_under_eff(dist.gaussian_pair(1.0), 1.0, 2)


# ---------------------------------------------------------------------------
# weak-signal expansion


def test_small_c_expansion_frozen():
    exp = chern.small_c_expansion(dist.gaussian_pair(0.05))
    assert exp.in_range
    assert_allclose(exp.c, 0.0238425791151, rtol=1e-8)
    assert exp.s_star == pytest.approx(0.5, abs=1e-12)
    assert_allclose(exp.alpha, 1.00129383225, rtol=1e-8)


def test_small_c_expansion_accuracy_at_low_snr():
    # documented accuracy at r = 0.05: the expanded C sits about 4.6%
    # below the exact r/2, while alpha and s_star are sub-percent
    exact = chern.chernoff_information(dist.gaussian_pair(0.05))
    exp = chern.small_c_expansion(dist.gaussian_pair(0.05))
    rel = exp.c / exact.c - 1.0
    assert -0.06 < rel < -0.03
    assert abs(exp.alpha / exact.alpha - 1.0) < 2e-3
    assert abs(exp.s_star - exact.s_star) < 1e-6


def test_small_c_expansion_identical_pair():
    pair = dist.gaussian_mixture_pair([1.0], [0.3], [0.9], [1.0], [0.3], [0.9])
    exp = chern.small_c_expansion(pair)
    assert (exp.c, exp.alpha, exp.s_star) == (0.0, 1.0, 0.5)
    assert exp.in_range


def test_small_c_expansion_warns_out_of_range():
    with pytest.warns(chern.ExpansionRangeWarning):
        exp = chern.small_c_expansion(dist.gaussian_pair(1.0))
    assert not exp.in_range
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        chern.small_c_expansion(dist.gaussian_pair(0.05))


def test_small_c_expansion_tracks_asymmetry():
    # an asymmetric pair pushes s_star off 1/2 in the same direction as the
    # full optimization
    pair = dist.poissonian_pair(1.2, 1.0)
    exp = chern.small_c_expansion(pair)
    full = chern.chernoff_information(pair)
    assert exp.in_range
    assert (exp.s_star - 0.5) * (full.s_star - 0.5) > 0.0
    assert abs(exp.c / full.c - 1.0) < 0.05
