"""End-to-end small-cell pipeline for one drop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_stats import PilotPlan, make_pilot_plan, select_aps, smallcell_dl_stats, smallcell_ul_stats
from .config import SimConfig
from .pilots import greedy_assign_smallcell, random_assignment
from .power_control import PowerAllocation, no_power_control, smallcell_maxmin
from .propagation import noise_and_snrs
from .rates import RateVector, smallcell_rates


@dataclass
class SmallCellDrop:
    serving_ap: np.ndarray
    dl_plan: PilotPlan
    ul_plan: PilotPlan
    mu: np.ndarray
    omega: np.ndarray
    alloc: PowerAllocation
    rates_dl: RateVector
    rates_ul: RateVector


def run_smallcell_drop(beta, config: SimConfig, seed=None, use_power_control=True, use_greedy_pilots=True) -> SmallCellDrop:
    """AP selection, pilots, estimation statistics, optional max-min and rates.

    ``seed`` drives the random selection order and the two (independent)
    pilot draws.
    """
    M, K = beta.shape
    snr = noise_and_snrs(config)
    order_rng, dl_rng, ul_rng = np.random.default_rng(seed).spawn(3)
    serving_ap = select_aps(beta, order_rng.permutation(K))

    if use_greedy_pilots:
        n_iter = config.n_greedy
        dl_plan = greedy_assign_smallcell(
            beta, serving_ap, config.tau_sc_dl, snr.rho_d_sc, snr.rho_dp_sc, n_iter, "dl", dl_rng
        )
        ul_plan = greedy_assign_smallcell(
            beta, serving_ap, config.tau_sc_ul, snr.rho_u_sc, snr.rho_up_sc, n_iter, "ul", ul_rng
        )
    else:
        dl_plan = make_pilot_plan(config.tau_sc_dl, random_assignment(K, config.tau_sc_dl, dl_rng))
        ul_plan = make_pilot_plan(config.tau_sc_ul, random_assignment(K, config.tau_sc_ul, ul_rng))

    mu = smallcell_dl_stats(beta, serving_ap, config.tau_sc_dl, snr.rho_dp_sc, dl_plan.gram2)
    omega = smallcell_ul_stats(beta, serving_ap, config.tau_sc_ul, snr.rho_up_sc, ul_plan.gram2)

    if use_power_control:
        dl = smallcell_maxmin("dl", mu, beta, serving_ap, snr.rho_d_sc)
        ul = smallcell_maxmin("ul", omega, beta, serving_ap, snr.rho_u_sc)
        alloc = PowerAllocation(
            alpha_dl=dl.alpha_dl,
            alpha_ul=ul.alpha_ul,
            achieved_min_rate=min(dl.achieved_min_rate, ul.achieved_min_rate),
            converged=dl.converged and ul.converged,
            iterations=dl.iterations + ul.iterations,
            trace=dl.trace + ul.trace,
        )
    else:
        base = no_power_control(np.ones((1, K)))
        alloc = PowerAllocation(alpha_dl=base.alpha_dl, alpha_ul=base.alpha_ul)

    rates_dl = smallcell_rates("dl", mu, beta, serving_ap, alloc.alpha_dl, snr.rho_d_sc)
    rates_ul = smallcell_rates("ul", omega, beta, serving_ap, alloc.alpha_ul, snr.rho_u_sc)
    return SmallCellDrop(serving_ap, dl_plan, ul_plan, mu, omega, alloc, rates_dl, rates_ul)
