"""Second-order channel-estimation statistics consumed by every rate formula.

Pilot indices are 0-based throughout. The pilot book is the standard basis
of C^tau, so two pilots are either identical or orthogonal and the Gram
magnitude table ``gram2`` is a 0/1 matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UnservableUserError(ValueError):
    """Small-cell AP selection ran out of APs (needs M >= K)."""


@dataclass(frozen=True)
class PilotPlan:
    tau: int
    assign: np.ndarray
    book: np.ndarray
    gram2: np.ndarray

    @property
    def K(self) -> int:
        return self.assign.shape[0]

    def with_assign(self, assign) -> "PilotPlan":
        return make_pilot_plan(self.tau, assign)


@dataclass(frozen=True)
class CellFreeStats:
    c: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True)
class SmallCellStats:
    serving_ap: np.ndarray
    mu: np.ndarray
    omega: np.ndarray


def make_pilot_plan(tau: int, assign) -> PilotPlan:
    """Build a pilot plan from per-user indices into a length-``tau`` book."""
    assign = np.asarray(assign, dtype=int).copy()
    if tau < 1:
        raise ValueError("pilot length must be at least 1")
    if assign.ndim != 1:
        raise ValueError("assign must be a 1-D array of pilot indices")
    if np.any(assign < 0) or np.any(assign >= tau):
        raise IndexError(f"pilot indices must lie in [0, {tau - 1}], got {assign.tolist()}")
    book = np.eye(tau)
    phi = book[:, assign]
    gram2 = np.abs(phi.conj().T @ phi) ** 2
    assign.setflags(write=False)
    return PilotPlan(tau=int(tau), assign=assign, book=book, gram2=gram2)


def cellfree_estimation_stats(beta: np.ndarray, plan: PilotPlan, rho_p: float) -> CellFreeStats:
    """MMSE scaling ``c`` and estimate variance ``gamma`` for every AP/user pair.

    ``c[m, k] = sqrt(tau rho_p) beta[m, k] / (tau rho_p sum_k' beta[m, k'] gram2[k, k'] + 1)``
    and ``gamma = sqrt(tau rho_p) beta c``.
    """
    tr = plan.tau * rho_p
    contaminated = beta @ plan.gram2.T  # [m, k] = sum_k' beta[m, k'] gram2[k, k']
    c = np.sqrt(tr) * beta / (tr * contaminated + 1.0)
    gamma = np.sqrt(tr) * beta * c
    return CellFreeStats(c=c, gamma=gamma)


def select_aps(beta: np.ndarray, user_order) -> np.ndarray:
    """Greedy small-cell AP selection.

    Users are visited in ``user_order``; each takes the still-available AP
    with the largest ``beta`` towards it, which then becomes unavailable.
    Ties go to the lowest AP index.
    """
    M, K = beta.shape
    if M < K:
        raise UnservableUserError(f"{K} users cannot each get a dedicated AP out of {M}")
    available = np.ones(M, dtype=bool)
    serving = np.empty(K, dtype=int)
    for k in user_order:
        column = np.where(available, beta[:, k], -np.inf)
        m = int(np.argmax(column))
        serving[k] = m
        available[m] = False
    return serving


def _mmse_variance(beta_own, interference, tau, rho):
    tr = tau * rho
    return tr * beta_own**2 / (tr * interference + 1.0)


def smallcell_dl_stats(beta, serving_ap, tau, rho_dp, dl_gram2) -> np.ndarray:
    """Downlink estimate variance ``mu[k]`` at user ``k``.

    Downlink pilots reach user ``k`` from every serving AP, so the
    interferer gains are ``beta[serving_ap[k'], k]``.
    """
    serving_ap = np.asarray(serving_ap)
    K = serving_ap.shape[0]
    users = np.arange(K)
    # cross[k, k'] = beta[m_k', k]
    cross = beta[serving_ap[None, :], users[:, None]]
    interference = np.sum(cross * dl_gram2, axis=1)
    return _mmse_variance(beta[serving_ap, users], interference, tau, rho_dp)


def smallcell_ul_stats(beta, serving_ap, tau, rho_up, ul_gram2) -> np.ndarray:
    """Uplink estimate variance ``omega[k]`` at the serving AP of user ``k``.

    Uplink pilots of all users arrive at AP ``m_k``, so the interferer
    gains are ``beta[serving_ap[k], k']``.
    """
    serving_ap = np.asarray(serving_ap)
    K = serving_ap.shape[0]
    users = np.arange(K)
    # cross[k, k'] = beta[m_k, k']
    cross = beta[serving_ap[:, None], users[None, :]]
    interference = np.sum(cross * ul_gram2, axis=1)
    return _mmse_variance(beta[serving_ap, users], interference, tau, rho_up)
