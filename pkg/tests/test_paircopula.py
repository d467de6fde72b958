"""Pair-copula family checks: densities, h-functions, tau links, fits,
sampling.  Heavy family-wide invariants live in _properties and are
invoked once each here.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import _properties
from dynavine import paircopula as pc
from dynavine.errors import DataError
from dynavine.numkernel import SeededRng
from scipy import stats

ALL_STATES = [
    pc.EdgeState("gaussian", (0.55,)),
    pc.EdgeState("student_t", (0.55, 4.0)),
    pc.EdgeState("clayton", (2.0,)),
    pc.EdgeState("frank", (5.0,)),
    pc.EdgeState("frank", (-5.0,)),
    pc.EdgeState("gumbel", (2.0,)),
    pc.EdgeState("joe", (2.0,)),
]

TAU_LINK_CASES = [
    ("gaussian", 0.0, 0.0),
    ("clayton", 0.4, 4.0 / 3.0),
    ("gumbel", 0.4, 5.0 / 3.0),
]


def test_density_normalization_property():
    _properties.density_normalization()

def test_h_finite_difference_property():
    _properties.h_finite_difference()

def test_tau_round_trip_property():
    _properties.tau_round_trips()


def test_log_density_independence_zero():
    assert pc.log_density(pc.INDEPENDENCE, 0.3, 0.9) == 0.0


def test_log_density_gaussian_at_center():
    # normal scores vanish at (0.5, 0.5), leaving -0.5*log(1-rho^2)
    val = pc.log_density(pc.EdgeState("gaussian", (0.5,)), 0.5, 0.5)
    assert_allclose(val, 0.14384103622589046, atol=1e-12)


def test_log_density_clayton_independence_limit():
    val = pc.log_density(pc.EdgeState("clayton", (1e-8,)), 0.3, 0.7)
    assert abs(val) < 1e-6


def test_log_density_rejects_bad_theta():
    with pytest.raises(ValueError):
        pc.log_density_params("clayton", -1.0, None, 0.5, 0.5)
    with pytest.raises(ValueError):
        pc.log_density_params("gaussian", 1.5, None, 0.5, 0.5)
    with pytest.raises(ValueError):
        pc.log_density_params("gumbel", 0.5, None, 0.5, 0.5)


def test_h_independence_identity():
    v = np.linspace(0.05, 0.95, 19)
    assert np.array_equal(pc.h_function(pc.INDEPENDENCE, v, np.full_like(v, 0.3)), v)


def test_h_gaussian_center():
    for rho in (-0.8, -0.2, 0.4, 0.9):
        val = pc.h_function(pc.EdgeState("gaussian", (rho,)), 0.5, 0.5)
        assert_allclose(val, 0.5, atol=1e-12)


def test_h_gaussian_closed_form():
    val = pc.h_function(pc.EdgeState("gaussian", (0.8,)), 0.9, 0.5)
    assert_allclose(val, 0.9836570029286732, atol=1e-9)


@pytest.mark.parametrize("state", ALL_STATES, ids=lambda s: f"{s.family}{s.params}")
def test_h_is_cdf_in_v(state):
    u = np.linspace(0.1, 0.9, 9)
    low = pc.h_function(state, np.full_like(u, 1e-6), u)
    high = pc.h_function(state, np.full_like(u, 1.0 - 1e-6), u)
    assert np.all(low < 1e-3)
    assert np.all(high > 1.0 - 1e-3)
    # nondecreasing in v at fixed u
    v = np.linspace(0.02, 0.98, 49)
    for uu in (0.2, 0.5, 0.8):
        hv = pc.h_function(state, v, np.full_like(v, uu))
        assert np.all(np.diff(hv) >= 0)


@pytest.mark.parametrize("state", ALL_STATES, ids=lambda s: f"{s.family}{s.params}")
def test_h_inverse_round_trip(state):
    p = np.linspace(0.05, 0.95, 10)
    for uu in (0.15, 0.5, 0.85):
        u = np.full_like(p, uu)
        v = pc.h_inverse(state, p, u)
        back = pc.h_function(state, v, u)
        assert np.max(np.abs(back - p)) < 1e-8


@pytest.mark.parametrize("family,tau,theta", TAU_LINK_CASES)
def test_tau_to_theta_values(family, tau, theta):
    assert_allclose(pc.tau_to_theta(family, tau), theta, atol=1e-6)


def test_joe_tau_against_quadrature_oracle():
    # mpmath quadrature of the Archimedean tau integral at theta=2
    assert_allclose(pc.theta_to_tau("joe", 2.0), 0.35506593315177356, atol=1e-9)


def test_frank_tau_against_debye_oracle():
    assert_allclose(pc.theta_to_tau("frank", 5.0), 0.4567009581601169, atol=1e-12)


def test_tau_range_errors():
    with pytest.raises(ValueError):
        pc.tau_to_theta("clayton", -0.2)
    with pytest.raises(ValueError):
        pc.tau_to_theta("gaussian", 1.0)


@pytest.mark.parametrize("family,tau", [("clayton", 0.4), ("gumbel", 0.4)])
def test_tau_monte_carlo_cross_check(family, tau):
    state = pc.state_from_tau(family, tau)
    uv = pc.sample(state, 100_000, SeededRng(414))
    assert abs(pc.empirical_tau(uv[:, 0], uv[:, 1]) - tau) < 0.01


@pytest.mark.parametrize("state", ALL_STATES, ids=lambda s: f"{s.family}{s.params}")
def test_sample_uniform_marginals(state):
    uv = pc.sample(state, 100_000, SeededRng(515))
    grid = np.linspace(0, 1, 101)
    for x in (uv[:, 0], uv[:, 1]):
        ecdf = np.searchsorted(np.sort(x), grid, side="right") / x.size
        assert np.max(np.abs(ecdf - grid)) < 0.02


def test_sample_independence_tau_near_zero():
    uv = pc.sample(pc.INDEPENDENCE, 100_000, SeededRng(616))
    assert abs(pc.empirical_tau(uv[:, 0], uv[:, 1])) < 0.01


def test_sample_gaussian_mi():
    uv = pc.sample(pc.EdgeState("gaussian", (0.8,)), 100_000, SeededRng(717))
    r = np.corrcoef(stats.norm.ppf(uv[:, 0]), stats.norm.ppf(uv[:, 1]))[0, 1]
    assert_allclose(-0.5 * np.log1p(-r * r), 0.511, atol=0.01)


def test_sample_clayton_tau():
    uv = pc.sample(pc.EdgeState("clayton", (3.5,)), 100_000, SeededRng(818))
    assert_allclose(pc.empirical_tau(uv[:, 0], uv[:, 1]), 3.5 / 5.5, atol=0.01)


def test_fit_window_independence():
    rng = SeededRng(3)
    fit = pc.fit_window(rng.uniform(500), rng.uniform(500), "independence")
    assert fit.nll == 0.0
    assert fit.aic == 0.0


def test_fit_window_gaussian_recovery():
    uv = pc.sample(pc.EdgeState("gaussian", (0.6,)), 5000, SeededRng(919))
    fit = pc.fit_window(uv[:, 0], uv[:, 1], "gaussian")
    assert abs(fit.state.params[0] - 0.6) < 0.03


def test_fit_window_aic_arithmetic():
    uv = pc.sample(pc.EdgeState("clayton", (2.0,)), 2000, SeededRng(1020))
    fit = pc.fit_window(uv[:, 0], uv[:, 1], "clayton")
    assert fit.aic == 2.0 * fit.nll + 2.0
    tfit = pc.fit_window(uv[:, 0], uv[:, 1], "student_t")
    assert tfit.aic == 2.0 * tfit.nll + 4.0  # k=2 with grid-selected df


def test_fit_window_needs_eight_pairs():
    with pytest.raises(DataError):
        pc.fit_window([0.1, 0.2, 0.3], [0.4, 0.5, 0.6], "gaussian")


def test_select_family_independence_data():
    # With six parametric rivals, chance AIC wins on null data are expected;
    # independence should still take a clear majority and any winner must
    # carry near-zero dependence.
    hits = 0
    for rep in range(50):
        rng = SeededRng(2000 + rep)
        best = pc.select_family_aic(rng.uniform(2000), rng.uniform(2000))
        if best.state.family == "independence":
            hits += 1
        else:
            assert abs(theta_to_tau_of(best.state)) < 0.06
    assert hits >= 30


def theta_to_tau_of(state):
    if state.family in ("gaussian", "student_t"):
        return 2.0 / math.pi * math.asin(state.params[0])
    return pc.theta_to_tau(state.family, state.params[0])


def test_select_family_clayton_data():
    hits = 0
    for rep in range(20):
        uv = pc.sample(pc.EdgeState("clayton", (3.0,)), 2000, SeededRng(3000 + rep))
        best = pc.select_family_aic(uv[:, 0], uv[:, 1])
        hits += best.state.family == "clayton"
    assert hits >= 19


def test_select_family_single_candidate():
    rng = SeededRng(4)
    best = pc.select_family_aic(rng.uniform(200), rng.uniform(200),
                                candidates=("gaussian",))
    assert best.state.family == "gaussian"


def test_state_distance():
    a = pc.EdgeState("gaussian", (0.2,))
    b = pc.EdgeState("gaussian", (0.5,))
    assert_allclose(pc.state_distance(a, b), 0.3, atol=1e-12)
    assert pc.state_distance(a, a) == 0.0
    t1 = pc.EdgeState("student_t", (0.5, 4.0))
    t2 = pc.EdgeState("student_t", (0.5, 8.0))
    assert_allclose(pc.state_distance(t1, t2), 2.0, atol=1e-12)
    with pytest.raises(ValueError):
        pc.state_distance(a, t1)


def test_latent_link_round_trip():
    # eta -> params -> eta recovers the unconstrained coordinate per family
    for family, params in (("gaussian", (0.3,)), ("clayton", (2.0,)),
                           ("frank", (-7.0,)), ("gumbel", (1.8,)),
                           ("joe", (3.0,)), ("student_t", (0.4, 8.0))):
        eta = pc.params_to_eta(family, params)
        back = pc.eta_to_params(family, eta)
        assert_allclose(back, params, atol=1e-9)
