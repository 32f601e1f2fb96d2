import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_feasible_eta, random_instance
from cellfree.channel_stats import cellfree_estimation_stats, make_pilot_plan
from cellfree.montecarlo import empirical_dl_sinr, empirical_ul_sinr
from cellfree.power_control import no_power_control
from cellfree.rates import (
    PowerConstraintError,
    RateVector,
    dl_rate_cellfree,
    dl_rate_collocated,
    genie_dl_rate_mc,
    large_m_diagnostic,
    smallcell_effective_sinr,
    smallcell_rate,
    smallcell_rates,
    ul_rate_cellfree,
    ul_rate_collocated,
)

ONE = np.ones((1, 1))


def test_single_pair_examples():
    g = np.full((1, 1), 0.5)
    assert dl_rate_cellfree(ONE, g, np.full((1, 1), 2.0), ONE, 1.0).per_user_rate[0] == pytest.approx(math.log2(1.25))
    assert dl_rate_collocated(0.5, 1.0, 1.0, 1, 1.0) == pytest.approx(math.log2(1.25))
    assert ul_rate_cellfree(ONE, g, [1.0], ONE, 1.0).per_user_rate[0] == pytest.approx(math.log2(1.25))


def test_zero_power_gives_zero_rate():
    rng = np.random.default_rng(0)
    beta, plan, gamma = random_instance(rng, 6, 3, 2)
    assert np.all(dl_rate_cellfree(beta, gamma, np.zeros((6, 3)), plan.gram2, 10.0).per_user_rate == 0)
    assert np.all(ul_rate_cellfree(beta, gamma, np.zeros(3), plan.gram2, 10.0).per_user_rate == 0)
    assert dl_rate_collocated(0.5, 1.0, 0.0, 10, 1.0) == 0


def test_power_constraints_enforced():
    rng = np.random.default_rng(1)
    beta, plan, gamma = random_instance(rng, 4, 2, 2)
    eta = no_power_control(gamma).eta_dl
    dl_rate_cellfree(beta, gamma, eta, plan.gram2, 1.0)
    with pytest.raises(PowerConstraintError):
        dl_rate_cellfree(beta, gamma, eta * 1.01, plan.gram2, 1.0)
    with pytest.raises(PowerConstraintError):
        dl_rate_cellfree(beta, gamma, -eta, plan.gram2, 1.0)
    with pytest.raises(PowerConstraintError):
        ul_rate_cellfree(beta, gamma, [0.5, 1.2], plan.gram2, 1.0)


def test_rate_vector_rejects_unknown_system():
    with pytest.raises(ValueError):
        RateVector(np.zeros(2), "dl")


@settings(max_examples=50)
@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 10_000))
def test_collocated_reductions(M, K, seed):
    rng = np.random.default_rng(seed)
    beta_k = 10.0 ** rng.uniform(-2, 1, size=K)
    beta = np.tile(beta_k, (M, 1))
    plan = make_pilot_plan(K, np.arange(K))
    gamma = cellfree_estimation_stats(beta, plan, 3.0).gamma
    eta_k = rng.dirichlet(np.ones(K)) * rng.uniform(0.2, 1.0)
    eta = np.tile(eta_k / (M * gamma[0]), (M, 1))
    np.testing.assert_allclose(
        dl_rate_cellfree(beta, gamma, eta, plan.gram2, 7.0).per_user_rate,
        dl_rate_collocated(gamma[0], beta_k, eta_k, M, 7.0),
        rtol=1e-10,
    )
    eta_u = rng.uniform(0, 1, size=K)
    np.testing.assert_allclose(
        ul_rate_cellfree(beta, gamma, eta_u, plan.gram2, 7.0).per_user_rate,
        ul_rate_collocated(gamma[0], beta_k, eta_u, M, 7.0),
        rtol=1e-10,
    )


def test_doubling_antennas_adds_at_most_one_bit():
    for M in (10, 100, 1000):
        assert dl_rate_collocated(0.5, 1.0, 0.2, 2 * M, 100.0) - dl_rate_collocated(0.5, 1.0, 0.2, M, 100.0) <= 1.0


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_rates_monotone_in_snr_and_equivariant(seed):
    rng = np.random.default_rng(seed)
    beta, plan, gamma = random_instance(rng, 7, 4, 2)
    eta = random_feasible_eta(rng, gamma)
    eta_u = rng.uniform(0, 1, 4)
    lo = dl_rate_cellfree(beta, gamma, eta, plan.gram2, 1.0).per_user_rate
    hi = dl_rate_cellfree(beta, gamma, eta, plan.gram2, 4.0).per_user_rate
    assert np.all(hi >= lo - 1e-12)
    assert np.all(
        ul_rate_cellfree(beta, gamma, eta_u, plan.gram2, 4.0).per_user_rate
        >= ul_rate_cellfree(beta, gamma, eta_u, plan.gram2, 1.0).per_user_rate - 1e-12
    )
    p = rng.permutation(4)
    gram_p = make_pilot_plan(plan.tau, plan.assign[p]).gram2
    np.testing.assert_allclose(
        dl_rate_cellfree(beta[:, p], gamma[:, p], eta[:, p], gram_p, 1.0).per_user_rate, lo[p], rtol=1e-12
    )
    np.testing.assert_allclose(
        ul_rate_cellfree(beta[:, p], gamma[:, p], eta_u[p], gram_p, 1.0).per_user_rate,
        ul_rate_cellfree(beta, gamma, eta_u, plan.gram2, 1.0).per_user_rate[p],
        rtol=1e-12,
    )


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_closed_forms_match_sample_simulation(seed):
    rng = np.random.default_rng(100 + seed)
    beta, plan, gamma = random_instance(rng, 12, 4, 2)
    eta = random_feasible_eta(rng, gamma)
    eta_u = rng.uniform(0.2, 1.0, 4)
    from cellfree.rates import dl_sinr_cellfree, ul_sinr_cellfree

    dl = dl_sinr_cellfree(beta, gamma, eta, plan.gram2, 10.0)
    ul = ul_sinr_cellfree(beta, gamma, eta_u, plan.gram2, 10.0)
    np.testing.assert_allclose(empirical_dl_sinr(beta, plan, eta, 10.0, 1.0, 40_000, seed), dl, rtol=0.05)
    np.testing.assert_allclose(empirical_ul_sinr(beta, plan, eta_u, 10.0, 1.0, 40_000, seed), ul, rtol=0.05)


def test_genie_rate_exceeds_statistical_rate():
    rng = np.random.default_rng(3)
    beta, plan, gamma = random_instance(rng, 20, 4, 2)
    eta = no_power_control(gamma).eta_dl
    closed = dl_rate_cellfree(beta, gamma, eta, plan.gram2, 10.0).per_user_rate
    genie = genie_dl_rate_mc(beta, eta, plan, 10.0, 1.0, n_samples=20_000, seed=1)
    assert np.all(genie.per_user_rate + 3 * genie.stderr >= closed)


def test_genie_reproducible_and_validated():
    plan = make_pilot_plan(1, [0])
    a = genie_dl_rate_mc(ONE, np.full((1, 1), 2.0), plan, 1.0, 1.0, n_samples=1, seed=5)
    b = genie_dl_rate_mc(ONE, np.full((1, 1), 2.0), plan, 1.0, 1.0, n_samples=1, seed=5)
    assert a.per_user_rate[0] == b.per_user_rate[0]
    with pytest.raises(ValueError):
        genie_dl_rate_mc(ONE, ONE, plan, 1.0, 1.0, n_samples=0)


def test_genie_gap_small_with_many_users():
    K, M = 40, 200
    plan = make_pilot_plan(K, np.arange(K))
    beta = np.ones((M, K))
    gamma = cellfree_estimation_stats(beta, plan, 1.0).gamma
    eta = 1.0 / (K * gamma)
    closed = dl_rate_cellfree(beta, gamma, eta, plan.gram2, 10.0).per_user_rate.mean()
    genie = genie_dl_rate_mc(beta, eta, plan, 10.0, 1.0, n_samples=500, seed=0).per_user_rate.mean()
    assert 0 < genie - closed < 0.1


def test_smallcell_effective_sinr_examples():
    beta = np.array([[0.9]])
    assert smallcell_effective_sinr("dl", np.array([0.6]), beta, [0], [1.0], 5.0)[0] == pytest.approx(
        5 * 0.6 / (5 * 0.3 + 1)
    )
    assert smallcell_effective_sinr("ul", np.array([0.9]), beta, [0], [1.0], 5.0)[0] == pytest.approx(4.5)
    with pytest.raises(ValueError):
        smallcell_effective_sinr("both", np.array([0.9]), beta, [0], [1.0], 5.0)


def test_smallcell_two_user_hand_instance():
    beta = np.array([[1.0, 0.2], [0.3, 0.8], [0.1, 0.1]])
    serving = np.array([0, 1])
    est = np.array([0.7, 0.5])
    alpha = np.array([0.6, 0.9])
    rho = 3.0
    dl = [
        rho * 0.6 * 0.7 / (rho * 0.6 * (1.0 - 0.7) + rho * 0.9 * beta[1, 0] + 1),
        rho * 0.9 * 0.5 / (rho * 0.9 * (0.8 - 0.5) + rho * 0.6 * beta[0, 1] + 1),
    ]
    ul = [
        rho * 0.6 * 0.7 / (rho * 0.6 * (1.0 - 0.7) + rho * 0.9 * beta[0, 1] + 1),
        rho * 0.9 * 0.5 / (rho * 0.9 * (0.8 - 0.5) + rho * 0.6 * beta[1, 0] + 1),
    ]
    np.testing.assert_allclose(smallcell_effective_sinr("dl", est, beta, serving, alpha, rho), dl)
    np.testing.assert_allclose(smallcell_effective_sinr("ul", est, beta, serving, alpha, rho), ul)
    r = smallcell_rates("dl", est, beta, serving, alpha, rho)
    assert r.system == "sc-dl"
    np.testing.assert_allclose(r.per_user_rate, smallcell_rate(np.array(dl)))
    assert smallcell_rates("ul", est, beta, serving, np.zeros(2), rho).per_user_rate.tolist() == [0.0, 0.0]


def test_large_m_concentration():
    rng = np.random.default_rng(2)
    profile = 10.0 ** rng.uniform(-1, 0, size=(50, 3))
    orth = make_pilot_plan(3, [0, 1, 2])
    table = large_m_diagnostic(profile, [100, 400], orth, 1.0, 1.0, n_samples=1500, seed=0)
    assert table[1]["ds_dev_var"] < table[0]["ds_dev_var"]
    assert all(row["mui_limit_power"] == 0 for row in table)
    shared = make_pilot_plan(2, [0, 0, 1])
    table = large_m_diagnostic(profile, [100], shared, 1.0, 1.0, n_samples=200, seed=0)
    assert table[0]["mui_limit_power"] > 0
