import numpy as np

from cellfree.channel_stats import cellfree_estimation_stats, make_pilot_plan


def random_instance(rng, M, K, tau, rho_p=1.0, spread=(-1.5, 0.5)):
    """Random gains spanning two decades, random pilots, matching gamma."""
    beta = 10.0 ** rng.uniform(*spread, size=(M, K))
    plan = make_pilot_plan(tau, rng.integers(0, tau, size=K))
    gamma = cellfree_estimation_stats(beta, plan, rho_p).gamma
    return beta, plan, gamma


def random_feasible_eta(rng, gamma):
    """Downlink coefficients with every AP at a random fraction of its budget."""
    M, K = gamma.shape
    share = rng.dirichlet(np.ones(K), size=M) * rng.uniform(0.3, 1.0, size=(M, 1))
    return share / gamma


# criterion number -> one-line measurement summary, printed by conftest
ACCEPTANCE_DETAILS = {}


def report(n, ok, detail):
    ACCEPTANCE_DETAILS[n] = detail
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail
