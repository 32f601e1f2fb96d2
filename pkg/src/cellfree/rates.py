"""Closed-form achievable rates for cell-free and small-cell operation.

All SINRs are assembled in linear scale. Matrices follow the ``[m, k]``
(AP, user) convention; ``gram2[k, k']`` is the squared pilot overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel_stats import PilotPlan, cellfree_estimation_stats
from .montecarlo import draw_channels
from .special import EULER_GAMMA, scaled_neg_ei

LOG2E = 1.0 / math.log(2.0)
SYSTEMS = ("cf-dl", "cf-ul", "sc-dl", "sc-ul")

# above this mean SINR the small-cell rate uses its logarithmic expansion
_LARGE_MU_BAR = 1e12


class PowerConstraintError(ValueError):
    """Power-control coefficients violate the per-AP or per-user budget."""


@dataclass(frozen=True)
class RateVector:
    per_user_rate: np.ndarray
    system: str
    stderr: np.ndarray | None = None

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")

    @property
    def min(self) -> float:
        return float(np.min(self.per_user_rate))


def check_dl_power(eta: np.ndarray, gamma: np.ndarray, tol: float = 1e-9) -> None:
    if np.any(eta < 0):
        raise PowerConstraintError("downlink power coefficients must be nonnegative")
    load = np.sum(eta * gamma, axis=1)
    if np.any(load > 1.0 + tol):
        m = int(np.argmax(load))
        raise PowerConstraintError(f"AP {m} exceeds its power budget: sum_k eta*gamma = {load[m]:.12g}")


def dl_sinr_terms(beta, gamma, eta, gram2, rho_d):
    """Numerator and denominator of the downlink SINR for every user."""
    coherent = np.sqrt(eta) * gamma  # [m, k'] = sqrt(eta) gamma
    signal = rho_d * np.sum(coherent, axis=0) ** 2
    # cross[k', k] = sum_m sqrt(eta[m,k']) gamma[m,k'] beta[m,k] / beta[m,k']
    cross = (coherent / beta).T @ beta
    contamination = rho_d * np.sum(gram2 * cross**2, axis=0) - rho_d * np.diagonal(gram2) * np.diagonal(cross) ** 2
    power = rho_d * beta.T @ np.sum(eta * gamma, axis=1)
    return signal, contamination + power + 1.0


def dl_sinr_cellfree(beta, gamma, eta, gram2, rho_d) -> np.ndarray:
    num, den = dl_sinr_terms(beta, gamma, eta, gram2, rho_d)
    return num / den


def dl_rate_cellfree(beta, gamma, eta, gram2, rho_d, check_power: bool = True) -> RateVector:
    """Downlink rate of conjugate beamforming with statistical CSI at the users.

    Desired signal ``rho_d (sum_m sqrt(eta) gamma)^2`` against coherent
    pilot-contamination interference, beamforming-gain uncertainty plus
    non-coherent interference, and unit noise.
    """
    eta = np.asarray(eta, dtype=float)
    if check_power:
        check_dl_power(eta, gamma)
    sinr = dl_sinr_cellfree(beta, gamma, eta, gram2, rho_d)
    return RateVector(np.log2(1.0 + sinr), "cf-dl")


def dl_rate_collocated(gamma_k, beta_k, eta_k, M, rho_d):
    """Collocated-array downlink rate; ``eta_k`` holds all users' coefficients.

    Returns the rate of every user when ``gamma_k``/``beta_k`` are vectors.
    """
    eta_k = np.asarray(eta_k, dtype=float)
    sinr = M * rho_d * np.asarray(gamma_k) * eta_k / (rho_d * np.asarray(beta_k) * np.sum(eta_k) + 1.0)
    return np.log2(1.0 + sinr)


def ul_sinr_terms(beta, gamma, eta_u, gram2, rho_u):
    eta_u = np.asarray(eta_u, dtype=float)
    gain = np.sum(gamma, axis=0)
    signal = rho_u * eta_u * gain**2
    # cross[k, k'] = sum_m gamma[m,k] beta[m,k'] / beta[m,k]
    cross = (gamma / beta).T @ beta
    contaminated = gram2 * cross**2
    np.fill_diagonal(contaminated, 0.0)
    contamination = rho_u * contaminated @ eta_u
    power = rho_u * (gamma.T @ beta) @ eta_u
    return signal, contamination + power + gain


def ul_sinr_cellfree(beta, gamma, eta_u, gram2, rho_u) -> np.ndarray:
    num, den = ul_sinr_terms(beta, gamma, eta_u, gram2, rho_u)
    return num / den


def ul_rate_cellfree(beta, gamma, eta_u, gram2, rho_u) -> RateVector:
    """Uplink rate of matched-filter detection at the CPU."""
    eta_u = np.asarray(eta_u, dtype=float)
    if np.any(eta_u < 0) or np.any(eta_u > 1.0 + 1e-12):
        raise PowerConstraintError("uplink power coefficients must lie in [0, 1]")
    return RateVector(np.log2(1.0 + ul_sinr_cellfree(beta, gamma, eta_u, gram2, rho_u)), "cf-ul")


def ul_rate_collocated(gamma_k, beta_k, eta_k, M, rho_u):
    eta_k = np.asarray(eta_k, dtype=float)
    sinr = M * rho_u * eta_k * np.asarray(gamma_k) / (rho_u * np.sum(eta_k * np.asarray(beta_k)) + 1.0)
    return np.log2(1.0 + sinr)


def genie_dl_rate_mc(beta, eta, plan: PilotPlan, rho_d, rho_p, n_samples: int = 10_000, seed=0) -> RateVector:
    """Downlink rate of a user that knows its instantaneous effective gain.

    Monte Carlo average of ``log2(1 + rho_d |A_kk|^2 / (rho_d sum_{k'!=k} |A_kk'|^2 + 1))``
    jointly over small-scale fading and pilot noise, with estimates rebuilt
    per sample. ``stderr`` carries the standard error of each user's mean.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    K = beta.shape[1]
    c = cellfree_estimation_stats(beta, plan, rho_p).c
    sq_eta = np.sqrt(eta)
    total = np.zeros(K)
    total_sq = np.zeros(K)
    done = 0
    while done < n_samples:
        size = min(2048, n_samples - done)
        g, ghat = draw_channels(beta, plan, rho_p, size, rng, c)
        power = np.abs(np.einsum("smk,smj->skj", g, np.conj(ghat) * sq_eta)) ** 2
        desired = np.diagonal(power, axis1=1, axis2=2)
        interference = power.sum(axis=2) - desired
        sample = np.log2(1.0 + rho_d * desired / (rho_d * interference + 1.0))
        total += sample.sum(axis=0)
        total_sq += (sample**2).sum(axis=0)
        done += size
    mean = total / n_samples
    if n_samples > 1:
        var = np.maximum(total_sq / n_samples - mean**2, 0.0) * n_samples / (n_samples - 1)
        stderr = np.sqrt(var / n_samples)
    else:
        stderr = np.full(K, np.nan)
    return RateVector(mean, "cf-dl", stderr=stderr)


def _smallcell_rate_scalar(mu_bar: float) -> float:
    if not mu_bar > 0:
        raise ValueError(f"mean SINR must be positive, got {mu_bar}")
    if mu_bar > _LARGE_MU_BAR:
        return LOG2E * (math.log(mu_bar) - EULER_GAMMA)
    return LOG2E * scaled_neg_ei(-1.0 / mu_bar)


def smallcell_rate(mu_bar):
    """Ergodic rate ``E log2(1 + mu_bar X)``, ``X ~ Exp(1)``, in closed form.

    Equals ``-log2(e) exp(1/mu_bar) Ei(-1/mu_bar)``. Accepts scalars or arrays.
    """
    arr = np.asarray(mu_bar, dtype=float)
    if arr.ndim == 0:
        return _smallcell_rate_scalar(float(arr))
    return np.array([_smallcell_rate_scalar(float(v)) for v in arr.ravel()]).reshape(arr.shape)


def smallcell_effective_sinr(system: str, est_var, beta, serving_ap, alpha, rho) -> np.ndarray:
    """Effective mean SINR of each small-cell link.

    ``est_var`` is ``mu`` (downlink) or ``omega`` (uplink). Downlink
    interference reaches user ``k`` from the other serving APs,
    ``beta[m_k', k]``; uplink interference reaches AP ``m_k`` from the other
    users, ``beta[m_k, k']``.
    """
    serving_ap = np.asarray(serving_ap)
    alpha = np.asarray(alpha, dtype=float)
    K = serving_ap.shape[0]
    users = np.arange(K)
    own = beta[serving_ap, users]
    if system == "dl":
        cross = beta[serving_ap[None, :], users[:, None]]  # [k, k'] = beta[m_k', k]
    elif system == "ul":
        cross = beta[serving_ap[:, None], users[None, :]]  # [k, k'] = beta[m_k, k']
    else:
        raise ValueError("system must be 'dl' or 'ul'")
    cross = cross.copy()
    np.fill_diagonal(cross, 0.0)
    interference = rho * cross @ alpha
    return rho * alpha * est_var / (rho * alpha * (own - est_var) + interference + 1.0)


def smallcell_rates(system, est_var, beta, serving_ap, alpha, rho) -> RateVector:
    sinr = smallcell_effective_sinr(system, est_var, beta, serving_ap, alpha, rho)
    rates = np.zeros_like(sinr)
    positive = sinr > 0
    rates[positive] = smallcell_rate(sinr[positive])
    return RateVector(rates, "sc-" + system)


def large_m_diagnostic(beta_profile, M_values, plan: PilotPlan, rho_d, rho_p, n_samples=2000, seed=0):
    """Empirical concentration of the normalized downlink signal as M grows.

    The ``M0 x K`` profile is tiled to each requested ``M``, power is split
    evenly (``eta = 1 / (K gamma)``), and for every ``M`` we measure how far
    ``DS_k / M`` and ``MUI_k / M`` stray from their deterministic limits.
    Returns a list of dicts with keys ``M``, ``ds_dev_var``,
    ``mui_dev_var`` (mean square deviations, averaged over users) and
    ``mui_limit_power`` (mean square of the limiting interference term,
    zero for orthogonal pilots).
    """
    beta_profile = np.asarray(beta_profile, dtype=float)
    M0, K = beta_profile.shape
    rng = np.random.default_rng(seed)
    out = []
    for M in M_values:
        beta = beta_profile[np.arange(M) % M0]
        stats = cellfree_estimation_stats(beta, plan, rho_p)
        eta = 1.0 / (K * stats.gamma)
        sq_eta = np.sqrt(eta)
        # limit[k, k'] = sqrt(tau rho_p rho_d) sum_m sqrt(eta[m,k']) c[m,k'] beta[m,k] phi_k'^T phi_k^*
        overlap = plan.gram2  # real 0/1 book, so phi_k'^T phi_k^* = gram2
        lim = np.sqrt(plan.tau * rho_p * rho_d) * (sq_eta * stats.c).T @ beta
        lim = (lim * overlap).T / M  # [k, k']
        ds_dev = np.zeros(K)
        mui_dev = np.zeros(K)
        mui_lim = np.zeros(K)
        done = 0
        while done < n_samples:
            size = min(512, n_samples - done)
            g, ghat = draw_channels(beta, plan, rho_p, size, rng, stats.c)
            A = np.sqrt(rho_d) * np.einsum("smk,smj->skj", g, np.conj(ghat) * sq_eta) / M
            q = np.exp(2j * np.pi * rng.random((size, K)))
            diag = np.diagonal(A, axis1=1, axis2=2)
            ds_dev += np.sum(np.abs(diag - np.diagonal(lim)) ** 2, axis=0)
            off_A = A - diag[:, :, None] * np.eye(K)
            off_lim = lim - np.diag(np.diagonal(lim))
            mui = np.einsum("skj,sj->sk", off_A, q)
            mui_limit = np.einsum("kj,sj->sk", off_lim, q)
            mui_dev += np.sum(np.abs(mui - mui_limit) ** 2, axis=0)
            mui_lim += np.sum(np.abs(mui_limit) ** 2, axis=0)
            done += size
        out.append(
            {
                "M": int(M),
                "ds_dev_var": float(np.mean(ds_dev / n_samples)),
                "mui_dev_var": float(np.mean(mui_dev / n_samples)),
                "mui_limit_power": float(np.mean(mui_lim / n_samples)),
            }
        )
    return out
