"""Large-scale fading: three-slope path loss, two-component shadowing, SNRs."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SimConfig
from .geometry import Layout, pairwise_wrap_distance

BOLTZMANN = 1.381e-23
NOISE_TEMPERATURE = 290.0

# negative eigenvalues of a shadowing covariance smaller than this are rounding
_PSD_JITTER = 1e-10


class ShadowingModelError(RuntimeError):
    """The spatial shadowing covariance is not positive semidefinite."""


@dataclass(frozen=True)
class LargeScaleState:
    """Large-scale fading of one drop.

    ``beta`` is linear scale, M x K (rows are APs). ``pl_db`` is the path
    loss in dB (negative numbers). ``z`` holds the standard normal shadowing
    deviates, ``a``/``b`` the AP and user components they were mixed from
    (``None`` in the uncorrelated mode).
    """

    beta: np.ndarray
    pl_db: np.ndarray
    z: np.ndarray
    distance: np.ndarray
    a: np.ndarray | None = None
    b: np.ndarray | None = None

    def to_csv(self, path: str | Path, which: str = "beta") -> None:
        """Dump ``beta`` or ``pl_db`` as CSV, one row per AP, one column per user."""
        data = getattr(self, which)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["ap"] + [f"user{k}" for k in range(data.shape[1])])
            for m, row in enumerate(data):
                writer.writerow([m] + [repr(float(v)) for v in row])


@dataclass(frozen=True)
class NormalizedSnrs:
    rho_d_cf: float
    rho_u_cf: float
    rho_p_cf: float
    rho_d_sc: float
    rho_u_sc: float
    rho_dp_sc: float
    rho_up_sc: float


def hata_constant_db(f: float, hAP: float, hu: float) -> float:
    """Hata-COST231 constant ``L`` in dB (``f`` in MHz, heights in m)."""
    lf = np.log10(f)
    return float(
        46.3 + 33.9 * lf - 13.82 * np.log10(hAP) - (1.1 * lf - 0.7) * hu + (1.56 * lf - 0.8)
    )


def path_loss_db(d, d0: float, d1: float, L: float):
    """Three-slope path loss in dB for distances ``d`` in km.

    Exponent 3.5 beyond ``d1``, 2 between ``d0`` and ``d1`` and flat below
    ``d0``. Continuous at both breakpoints. Works elementwise on arrays.
    """
    d = np.asarray(d, dtype=float)
    far = -L - 35.0 * np.log10(np.maximum(d, d1))
    mid = -L - 15.0 * np.log10(d1) - 20.0 * np.log10(np.clip(d, d0, d1))
    out = np.where(d > d1, far, mid)
    return float(out) if out.ndim == 0 else out


def _correlated_normals(distance: np.ndarray, d_decorr: float, rng: np.random.Generator):
    cov = 2.0 ** (-distance / d_decorr)
    cov = 0.5 * (cov + cov.T)
    eigval, eigvec = np.linalg.eigh(cov)
    if eigval.min() < -_PSD_JITTER:
        raise ShadowingModelError(
            f"shadowing covariance has eigenvalue {eigval.min():.3e} < -{_PSD_JITTER}"
        )
    root = (eigvec * np.sqrt(np.clip(eigval, 0.0, None))) @ eigvec.T
    return root @ rng.standard_normal(distance.shape[0])


def draw_shadowing(layout: Layout, delta: float, d_decorr: float, seed):
    """Two-component correlated shadowing.

    ``a`` (one entry per AP) and ``b`` (one per user) are zero-mean,
    unit-variance Gaussian vectors whose covariance decays as
    ``2 ** (-d / d_decorr)`` in the torus distance. They are drawn through
    the symmetric square root of the covariance. The mix is
    ``z[m, k] = sqrt(delta) * a[m] + sqrt(1 - delta) * b[k]``.

    Returns ``(a, b, z)``.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if d_decorr <= 0:
        raise ValueError("d_decorr must be positive")
    rng = np.random.default_rng(seed)
    d_ap = pairwise_wrap_distance(layout.ap_xy, layout.ap_xy, layout.D)
    d_user = pairwise_wrap_distance(layout.user_xy, layout.user_xy, layout.D)
    a = _correlated_normals(d_ap, d_decorr, rng)
    b = _correlated_normals(d_user, d_decorr, rng)
    z = np.sqrt(delta) * a[:, None] + np.sqrt(1.0 - delta) * b[None, :]
    return a, b, z


def large_scale_matrix(layout: Layout, config: SimConfig, shadowing=None, seed=None) -> LargeScaleState:
    """Assemble ``beta[m, k] = PL[m, k] * 10 ** (sigma_sh * z[m, k] / 10)``.

    ``shadowing`` is the ``(a, b, z)`` triple from :func:`draw_shadowing`.
    When omitted, ``z`` is drawn i.i.d. standard normal from ``seed``. The
    full ``z`` matrix is always drawn; pairs closer than ``d1`` simply
    ignore it (no shadowing inside the second breakpoint).
    """
    distance = pairwise_wrap_distance(layout.ap_xy, layout.user_xy, layout.D)
    L = hata_constant_db(config.f, config.hAP, config.hu)
    pl_db = path_loss_db(distance, config.d0, config.d1, L)
    if shadowing is None:
        rng = np.random.default_rng(seed)
        a = b = None
        z = rng.standard_normal(distance.shape)
    else:
        a, b, z = shadowing
    shadow_db = np.where(distance > config.d1, config.sigma_sh * z, 0.0)
    beta = 10.0 ** ((pl_db + shadow_db) / 10.0)
    return LargeScaleState(beta=beta, pl_db=pl_db, z=z, distance=distance, a=a, b=b)


def noise_power(B: float, noise_figure_db: float) -> float:
    """Thermal noise power in W."""
    return B * BOLTZMANN * NOISE_TEMPERATURE * 10.0 ** (noise_figure_db / 10.0)


def noise_and_snrs(config: SimConfig) -> NormalizedSnrs:
    """Normalize the radiated powers by the noise power.

    The small-cell downlink gets ``M / K`` times the cell-free per-AP SNR so
    that the total radiated power is the same for both systems.
    """
    noise = noise_power(config.B, config.noise_figure_db)
    rho_d = config.p_dl / noise
    rho_u = config.p_ul / noise
    rho_p = config.p_pilot / noise
    return NormalizedSnrs(
        rho_d_cf=rho_d,
        rho_u_cf=rho_u,
        rho_p_cf=rho_p,
        rho_d_sc=config.M / config.K * rho_d,
        rho_u_sc=rho_u,
        rho_dp_sc=rho_p,
        rho_up_sc=rho_p,
    )
