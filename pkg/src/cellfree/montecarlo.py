"""Sample-level simulation of uplink training and payload transmission.

Draws small-scale fading, pilot noise and the resulting MMSE estimates, and
builds empirical versions of the effective-channel statistics. Nothing here
uses the closed-form rate expressions, so it serves as an independent
oracle for them.
"""

from __future__ import annotations

import numpy as np

from .channel_stats import PilotPlan, cellfree_estimation_stats

_CHUNK = 4096


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channels(beta: np.ndarray, plan: PilotPlan, rho_p: float, n: int, rng, c=None):
    """Draw ``n`` realizations of the true channel and its MMSE estimate.

    Returns ``(g, ghat)``, both of shape ``(n, M, K)``. The pilot book is
    the standard basis, so projecting the received pilot block onto user
    ``k``'s pilot just reads entry ``assign[k]``.
    """
    M, K = beta.shape
    if c is None:
        c = cellfree_estimation_stats(beta, plan, rho_p).c
    g = np.sqrt(beta) * _cn(rng, (n, M, K))
    received = _cn(rng, (n, M, plan.tau))
    scale = np.sqrt(plan.tau * rho_p)
    for k in range(K):
        received[:, :, plan.assign[k]] += scale * g[:, :, k]
    ghat = c * received[:, :, plan.assign]
    return g, ghat


def _chunks(n):
    done = 0
    while done < n:
        size = min(_CHUNK, n - done)
        yield size
        done += size


def empirical_dl_sinr(beta, plan, eta, rho_d, rho_p, n_samples, seed) -> np.ndarray:
    """Per-user downlink SINR ``|DS|^2 / (Var BU + sum E|UI|^2 + 1)`` from samples.

    ``A[s, k, j] = sum_m sqrt(eta[m, j]) g[m, k] conj(ghat[m, j])`` is the
    effective gain from user ``j``'s beam to user ``k``; the desired-signal
    mean, the beamforming-uncertainty variance and the inter-user powers are
    all sample moments of ``A``.
    """
    rng = np.random.default_rng(seed)
    K = beta.shape[1]
    c = cellfree_estimation_stats(beta, plan, rho_p).c
    sq_eta = np.sqrt(eta)
    s1 = np.zeros(K, dtype=complex)
    s2 = np.zeros((K, K))
    for size in _chunks(n_samples):
        g, ghat = draw_channels(beta, plan, rho_p, size, rng, c)
        A = np.einsum("smk,smj->skj", g, np.conj(ghat) * sq_eta)
        s1 += np.diagonal(A, axis1=1, axis2=2).sum(axis=0)
        s2 += np.sum(np.abs(A) ** 2, axis=0)
    mean_ds = s1 / n_samples
    second = s2 / n_samples
    ds2 = rho_d * np.abs(mean_ds) ** 2
    bu = rho_d * (np.diagonal(second) - np.abs(mean_ds) ** 2)
    ui = rho_d * (second.sum(axis=1) - np.diagonal(second))
    return ds2 / (bu + ui + 1.0)


def empirical_ul_sinr(beta, plan, eta_u, rho_u, rho_p, n_samples, seed) -> np.ndarray:
    """Per-user uplink SINR of matched-filter detection from samples.

    ``B[s, k, j] = sum_m conj(ghat[m, k]) g[m, j]``; the noise term is the
    sample power of ``sum_m conj(ghat[m, k]) w[m]`` with fresh receiver noise.
    """
    rng = np.random.default_rng(seed)
    M, K = beta.shape
    eta_u = np.asarray(eta_u, dtype=float)
    c = cellfree_estimation_stats(beta, plan, rho_p).c
    s1 = np.zeros(K, dtype=complex)
    s2 = np.zeros((K, K))
    noise = np.zeros(K)
    for size in _chunks(n_samples):
        g, ghat = draw_channels(beta, plan, rho_p, size, rng, c)
        B = np.einsum("smk,smj->skj", np.conj(ghat), g)
        s1 += np.diagonal(B, axis1=1, axis2=2).sum(axis=0)
        s2 += np.sum(np.abs(B) ** 2, axis=0)
        w = _cn(rng, (size, M))
        noise += np.sum(np.abs(np.einsum("smk,sm->sk", np.conj(ghat), w)) ** 2, axis=0)
    mean_ds = s1 / n_samples
    second = s2 / n_samples
    ds2 = rho_u * eta_u * np.abs(mean_ds) ** 2
    bu = rho_u * eta_u * (np.diagonal(second) - np.abs(mean_ds) ** 2)
    off = second * eta_u[None, :]
    ui = rho_u * (off.sum(axis=1) - np.diagonal(off))
    return ds2 / (bu + ui + noise / n_samples)
