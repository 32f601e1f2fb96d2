"""Quick oracle and identity checks behind the ``validate`` command."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .channel_stats import cellfree_estimation_stats, make_pilot_plan
from .harness import effective_ap_count, net_throughput
from .montecarlo import empirical_dl_sinr, empirical_ul_sinr
from .pilots import random_assignment
from .power_control import (
    dl_maxmin_cellfree,
    no_power_control,
    ul_maxmin_cellfree,
    ul_model_cellfree,
)
from .rates import (
    dl_rate_collocated,
    dl_sinr_cellfree,
    dl_rate_cellfree,
    ul_rate_cellfree,
    ul_rate_collocated,
    ul_sinr_cellfree,
)
from .special import exp_int_ei


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        self.passed = bool(self.passed)


def _random_instance(rng, M, K, tau, rho_p=1.0):
    beta = 10.0 ** rng.uniform(-1.5, 0.5, size=(M, K))
    plan = make_pilot_plan(tau, rng.integers(0, tau, size=K))
    gamma = cellfree_estimation_stats(beta, plan, rho_p).gamma
    return beta, plan, gamma


def check_ei() -> Check:
    worst = 0.0
    for x in (-0.001, -0.1, -1.0, -5.0, -20.0):
        # Ei(x) = -int_{-x}^inf exp(-t) / t dt
        ref = -integrate.quad(lambda t: math.exp(-t) / t, -x, np.inf, epsabs=1e-14, epsrel=1e-13)[0]
        worst = max(worst, abs(exp_int_ei(x) - ref))
    return Check("exponential integral vs quadrature", worst < 1e-9, f"max abs error {worst:.2e}")


def check_collocated(seed=0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        M, K = int(rng.integers(2, 20)), int(rng.integers(1, 6))
        beta_k = 10.0 ** rng.uniform(-1.5, 0.5, size=K)
        beta = np.tile(beta_k, (M, 1))
        plan = make_pilot_plan(K, np.arange(K))
        gamma = cellfree_estimation_stats(beta, plan, 1.0).gamma
        eta_k = rng.dirichlet(np.ones(K)) * rng.uniform(0.5, 1.0)
        eta = np.tile(eta_k / (M * gamma[0]), (M, 1))
        a = dl_rate_cellfree(beta, gamma, eta, plan.gram2, 5.0).per_user_rate
        b = dl_rate_collocated(gamma[0], beta_k, eta_k, M, 5.0)
        eta_u = rng.uniform(0.1, 1.0, size=K)
        c = ul_rate_cellfree(beta, gamma, eta_u, plan.gram2, 5.0).per_user_rate
        d = ul_rate_collocated(gamma[0], beta_k, eta_u, M, 5.0)
        worst = max(worst, np.max(np.abs(a - b) / b), np.max(np.abs(c - d) / d))
    return Check("collocated reductions", worst < 1e-10, f"max rel error {worst:.2e}")


def check_monte_carlo(seed=1, n_samples=20_000) -> Check:
    rng = np.random.default_rng(seed)
    beta, plan, gamma = _random_instance(rng, 10, 4, 2)
    eta = no_power_control(gamma).eta_dl
    eta_u = rng.uniform(0.2, 1.0, size=4)
    dl = dl_sinr_cellfree(beta, gamma, eta, plan.gram2, 10.0)
    ul = ul_sinr_cellfree(beta, gamma, eta_u, plan.gram2, 10.0)
    dl_mc = empirical_dl_sinr(beta, plan, eta, 10.0, 1.0, n_samples, seed)
    ul_mc = empirical_ul_sinr(beta, plan, eta_u, 10.0, 1.0, n_samples, seed + 1)
    err = max(np.max(np.abs(dl - dl_mc) / dl), np.max(np.abs(ul - ul_mc) / ul))
    return Check("closed-form SINR vs sample simulation", err < 0.05, f"max rel error {err:.3f}")


def check_maxmin(seed=2) -> Check:
    rng = np.random.default_rng(seed)
    M, K, tau = 16, 4, 2
    beta, plan, gamma = _random_instance(rng, M, K, tau)
    rho = 100.0
    base = no_power_control(gamma)
    dl = dl_maxmin_cellfree(gamma, beta, plan.gram2, rho)
    rates = dl_rate_cellfree(beta, gamma, dl.eta_dl, plan.gram2, rho).per_user_rate
    base_min = dl_rate_cellfree(beta, gamma, base.eta_dl, plan.gram2, rho).min
    spread = float(np.ptp(rates))
    ok = spread <= math.log2(1 + 1e-3) and rates.min() >= base_min - 1e-12
    return Check("downlink max-min certificate", ok, f"rate spread {spread:.2e}, min {rates.min():.4f} vs {base_min:.4f}")


def check_ul_lp(seed=3) -> Check:
    """Uplink max-min level against an LP bisection solved by scipy."""
    rng = np.random.default_rng(seed)
    beta, plan, gamma = _random_instance(rng, 12, 3, 2)
    rho = 100.0
    alloc = ul_maxmin_cellfree(gamma, beta, plan.gram2, rho)
    model = ul_model_cellfree(gamma, beta, plan.gram2, rho)
    K = len(model.signal)

    def lp_feasible(t):
        A = t * (np.diag(model.self_gain) + model.cross) - np.diag(model.signal)
        res = optimize.linprog(np.zeros(K), A_ub=A, b_ub=-t * model.noise, bounds=[(0, 1)] * K, method="highs")
        return res.status == 0

    lo, hi = 0.0, model.upper_bound()
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if lp_feasible(mid) else (lo, mid)
    ref = math.log2(1 + lo)
    err = abs(alloc.achieved_min_rate - ref)
    return Check("uplink max-min vs LP oracle", err < math.log2(1 + 1e-3), f"{alloc.achieved_min_rate:.5f} vs {ref:.5f}")


def check_arithmetic() -> Check:
    cf = float(net_throughput(1.0, 20e6, 20, 200))
    sc = float(net_throughput(1.0, 20e6, 40, 200))
    uniform = int(effective_ap_count(np.ones((100, 1)), np.ones((100, 1)))[0])
    orth = random_assignment(4, 4, 0)
    ok = cf == 9e6 and sc == 8e6 and uniform == 95 and sorted(orth) == [0, 1, 2, 3]
    return Check("throughput and AP-count arithmetic", ok, f"cf {cf:.0f}, sc {sc:.0f}, uniform count {uniform}")


CHECKS = (check_ei, check_collocated, check_monte_carlo, check_maxmin, check_ul_lp, check_arithmetic)


def run_validation() -> list[Check]:
    results = []
    for fn in CHECKS:
        try:
            results.append(fn())
        except Exception as exc:  # a crashing check is a failed check
            results.append(Check(fn.__name__, False, f"{type(exc).__name__}: {exc}"))
    return results
