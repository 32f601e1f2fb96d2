"""Random and greedy pilot assignment.

The greedy refinement repeatedly takes the user with the lowest rate and
moves it to the pilot that collects the least interfering large-scale gain
from the users already on it. Rates are evaluated at the full-power
allocation since pilots are assigned before power control.
"""

from __future__ import annotations

import numpy as np

from .channel_stats import PilotPlan, cellfree_estimation_stats, make_pilot_plan, smallcell_dl_stats, smallcell_ul_stats
from .power_control import no_power_control
from .rates import dl_sinr_cellfree, smallcell_effective_sinr


def random_assignment(K: int, tau: int, seed=None) -> np.ndarray:
    """Per-user pilot indices; orthogonal pilots when there are enough of them."""
    if tau < 1:
        raise ValueError("pilot length must be at least 1")
    if tau >= K:
        return np.arange(K)
    return np.random.default_rng(seed).integers(0, tau, size=K)


def pilot_loads(weights: np.ndarray, assign: np.ndarray, k_star: int, tau: int) -> np.ndarray:
    """Score of every pilot for user ``k_star``: sum of ``weights[k']`` over other users on it."""
    w = np.asarray(weights, dtype=float).copy()
    w[k_star] = 0.0
    return np.bincount(assign, weights=w, minlength=tau)


def contamination_score(beta: np.ndarray, plan: PilotPlan, k_star: int, candidate: int) -> float:
    """``sum_m sum_{k' != k_star, assign[k'] = candidate} beta[m, k']``."""
    if not 0 <= candidate < plan.tau:
        raise IndexError(f"candidate pilot {candidate} outside [0, {plan.tau - 1}]")
    loads = pilot_loads(np.sum(beta, axis=0), plan.assign, k_star, plan.tau)
    return float(loads[candidate])


def _reassign(assign, k_star, weights, tau):
    loads = pilot_loads(weights, assign, k_star, tau)
    assign[k_star] = int(np.argmin(loads))  # first index wins ties


def greedy_assign_cellfree(beta, tau, rho_d, rho_p, n_iter, seed=None, trace=None) -> PilotPlan:
    """Greedy pilot refinement for cell-free operation.

    ``trace``, if given, is a list that receives ``(k_star, new_pilot)`` per
    iteration.
    """
    if n_iter < 0:
        raise ValueError("n_iter must be nonnegative")
    K = beta.shape[1]
    assign = random_assignment(K, tau, seed).copy()
    weights = np.sum(beta, axis=0)
    for _ in range(n_iter):
        plan = make_pilot_plan(tau, assign)
        gamma = cellfree_estimation_stats(beta, plan, rho_p).gamma
        eta = no_power_control(gamma).eta_dl
        k_star = int(np.argmin(dl_sinr_cellfree(beta, gamma, eta, plan.gram2, rho_d)))
        _reassign(assign, k_star, weights, tau)
        if trace is not None:
            trace.append((k_star, int(assign[k_star])))
    return make_pilot_plan(tau, assign)


def greedy_assign_smallcell(beta, serving_ap, tau, rho, rho_pilot, n_iter, side, seed=None, trace=None) -> PilotPlan:
    """Greedy pilot refinement for one small-cell link direction.

    The worst user is the one with the lowest full-power rate on ``side``.
    Its candidate pilots are scored by the gains that pollute its own
    estimate: ``beta[serving_ap[k'], k_star]`` for the downlink and
    ``beta[serving_ap[k_star], k']`` for the uplink.
    """
    if n_iter < 0:
        raise ValueError("n_iter must be nonnegative")
    if side not in ("dl", "ul"):
        raise ValueError("side must be 'dl' or 'ul'")
    serving_ap = np.asarray(serving_ap)
    K = serving_ap.shape[0]
    stats_fn = smallcell_dl_stats if side == "dl" else smallcell_ul_stats
    assign = random_assignment(K, tau, seed).copy()
    ones = np.ones(K)
    for _ in range(n_iter):
        plan = make_pilot_plan(tau, assign)
        est = stats_fn(beta, serving_ap, tau, rho_pilot, plan.gram2)
        k_star = int(np.argmin(smallcell_effective_sinr(side, est, beta, serving_ap, ones, rho)))
        if side == "dl":
            weights = beta[serving_ap, k_star]
        else:
            weights = beta[serving_ap[k_star], :]
        _reassign(assign, k_star, weights, tau)
        if trace is not None:
            trace.append((k_star, int(assign[k_star])))
    return make_pilot_plan(tau, assign)
