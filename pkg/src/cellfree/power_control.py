"""Max-min power control by bisection over feasibility subproblems.

Cell-free downlink: each bisection step is a second-order cone feasibility
program solved with cvxpy. Cell-free uplink and both small-cell links: each
step is a linear feasibility problem of the form
``s_k p_k >= t (a_k p_k + sum_{j != k} P_kj p_j + n_k)`` on ``p in [0, 1]^K``,
decided exactly through its minimal (component-wise smallest) solution.

Bisection runs on the SINR target ``t`` and stops once the bracket is
narrower than ``eps`` relative to its lower end. The lower end starts at
the full-power baseline, which is always feasible, so a max-min solve never
returns less than the no-power-control min rate.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import cvxpy as cp
import numpy as np

from .rates import dl_sinr_cellfree, smallcell_rate, ul_sinr_terms

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-3
DEFAULT_TOL = 1e-7
DEFAULT_SOLVER = "CLARABEL"
# the simplicial LDL backend is several times faster than the supernodal one here
DEFAULT_SOLVER_OPTS = {"direct_solve_method": "qdldl"}


@dataclass
class BisectionStep:
    t: float
    feasible: bool
    residual: float
    status: str


@dataclass
class PowerAllocation:
    """Output of a power-control solve.

    Only the coefficients of the solved problem are filled in; the others
    stay ``None``. ``achieved_min_rate`` is in bits/s/Hz.
    """

    eta_dl: np.ndarray | None = None
    eta_ul: np.ndarray | None = None
    alpha_dl: np.ndarray | None = None
    alpha_ul: np.ndarray | None = None
    achieved_min_rate: float = float("nan")
    converged: bool = True
    iterations: int = 0
    t_bounds: tuple[float, float] = (float("nan"), float("nan"))
    trace: list[BisectionStep] = field(default_factory=list)

    def write_trace(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "feasible", "residual", "status"])
            for step in self.trace:
                writer.writerow([repr(step.t), int(step.feasible), repr(step.residual), step.status])


@dataclass
class FeasibilityCertificate:
    feasible: bool
    status: str
    residual: float
    witness: dict | None = None


def no_power_control(gamma: np.ndarray) -> PowerAllocation:
    """Full-power baselines.

    Every AP splits its budget evenly, ``eta[m, k] = 1 / sum_k' gamma[m, k']``,
    which meets the per-AP constraint with equality; all users and all
    small-cell links transmit at full power.
    """
    M, K = gamma.shape
    eta_dl = np.repeat(1.0 / np.sum(gamma, axis=1, keepdims=True), K, axis=1)
    ones = np.ones(K)
    return PowerAllocation(eta_dl=eta_dl, eta_ul=ones, alpha_dl=ones.copy(), alpha_ul=ones.copy())


def max_bisection_steps(t_lo: float, t_hi: float, eps: float) -> int:
    if t_hi <= t_lo * (1.0 + eps):
        return 0
    return math.ceil(math.log2((t_hi - t_lo) / (eps * t_lo)))


def _bisect(check, t_lo, t_hi, eps, max_iter=200):
    """Shrink ``[t_lo, t_hi]`` until ``t_hi - t_lo < eps * t_lo``.

    ``check(t)`` returns ``(status, residual, witness, level)`` with status
    in feasible/infeasible/indeterminate; indeterminate counts as infeasible.
    ``level`` is the smallest SINR the witness actually reaches, which can
    lift the lower end past ``t``.
    """
    trace = []
    best = None
    indeterminate = 0
    while t_hi - t_lo >= eps * t_lo and len(trace) < max_iter:
        t = 0.5 * (t_lo + t_hi)
        status, residual, witness, level = check(t)
        ok = status == "feasible"
        trace.append(BisectionStep(t, ok, residual, status))
        if ok:
            t_lo, best = min(max(t, level), t_hi), witness
        else:
            if status == "indeterminate":
                indeterminate += 1
                log.warning("feasibility at t=%.6g indeterminate (residual %.3g); treated as infeasible", t, residual)
            t_hi = t
    return t_lo, t_hi, best, trace, indeterminate


# ---------------------------------------------------------------------------
# Linear (standard interference) problems


def minimal_power(signal, self_gain, cross, noise, t):
    """Smallest ``p >= 0`` with ``signal_k p_k >= t (self_k p_k + (cross p)_k + n_k)``.

    ``cross`` must have a zero diagonal. Returns ``None`` when no
    nonnegative solution exists (target above the spectral limit).
    """
    d = signal - t * self_gain
    if np.any(d <= 0):
        return None
    F = cross / d[:, None]
    u = noise / d
    K = len(signal)
    try:
        p = np.linalg.solve(np.eye(K) - t * F, t * u)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        return None
    return p


@dataclass(frozen=True)
class LinearSinrModel:
    """SINR_k = signal_k p_k / (self_k p_k + sum_{j!=k} cross_kj p_j + noise_k)."""

    signal: np.ndarray
    self_gain: np.ndarray
    cross: np.ndarray
    noise: np.ndarray

    def sinr(self, p):
        p = np.asarray(p, dtype=float)
        return self.signal * p / (self.self_gain * p + self.cross @ p + self.noise)

    def check(self, t, tol=DEFAULT_TOL):
        """Return ``(status, residual, p)`` for SINR target ``t``."""
        p = minimal_power(self.signal, self.self_gain, self.cross, self.noise, t)
        if p is None:
            return "infeasible", float("inf"), None
        excess = float(np.max(p) - 1.0)
        if excess > tol:
            return "infeasible", excess, None
        p = np.minimum(p, 1.0)
        residual = max(0.0, float(np.max((t - self.sinr(p)) / t)))
        return ("feasible" if residual <= tol else "infeasible"), residual, p

    def _bisect_check(self, t, tol):
        status, residual, p = self.check(t, tol)
        return status, residual, p, t

    def upper_bound(self) -> float:
        # each user alone at full power
        return float(np.min(self.signal / (self.self_gain + self.noise)))


def _solve_linear(model: LinearSinrModel, eps, tol, to_rate):
    K = len(model.signal)
    base = np.ones(K)
    t_lo = float(np.min(model.sinr(base)))
    t_hi = max(model.upper_bound(), t_lo)
    t_lo, t_hi_end, p, trace, indeterminate = _bisect(lambda t: model._bisect_check(t, tol), t_lo, t_hi, eps)
    if p is None:
        p = base
    rates = to_rate(model.sinr(p))
    return p, float(np.min(rates)), (t_lo, t_hi_end), trace, indeterminate == 0


def ul_model_cellfree(gamma, beta, gram2, rho_u) -> LinearSinrModel:
    K = gamma.shape[1]
    eye = np.eye(K)
    # SINR denominator is affine in eta; recover the coefficients column by column
    _, den0 = ul_sinr_terms(beta, gamma, np.zeros(K), gram2, rho_u)
    coeff = np.empty((K, K))
    for j in range(K):
        _, den = ul_sinr_terms(beta, gamma, eye[j], gram2, rho_u)
        coeff[:, j] = den - den0
    signal = rho_u * np.sum(gamma, axis=0) ** 2
    self_gain = np.diagonal(coeff).copy()
    cross = coeff * (1.0 - eye)
    return LinearSinrModel(signal, self_gain, cross, den0)


def ul_maxmin_cellfree(gamma, beta, gram2, rho_u, eps=DEFAULT_EPS, tol=DEFAULT_TOL) -> PowerAllocation:
    """Max-min uplink powers ``eta_k in [0, 1]``; at the optimum all SINRs are equal."""
    model = ul_model_cellfree(gamma, beta, gram2, rho_u)
    p, rate, bounds, trace, ok = _solve_linear(model, eps, tol, lambda s: np.log2(1.0 + s))
    return PowerAllocation(
        eta_ul=p, achieved_min_rate=rate, converged=ok, iterations=len(trace), t_bounds=bounds, trace=trace
    )


def smallcell_model(system, est_var, beta, serving_ap, rho) -> LinearSinrModel:
    serving_ap = np.asarray(serving_ap)
    K = serving_ap.shape[0]
    users = np.arange(K)
    own = beta[serving_ap, users]
    if system == "dl":
        cross = beta[serving_ap[None, :], users[:, None]]
    elif system == "ul":
        cross = beta[serving_ap[:, None], users[None, :]]
    else:
        raise ValueError("system must be 'dl' or 'ul'")
    cross = rho * cross * (1.0 - np.eye(K))
    return LinearSinrModel(rho * est_var, rho * (own - est_var), cross, np.ones(K))


def smallcell_maxmin(system, est_var, beta, serving_ap, rho, eps=DEFAULT_EPS, tol=DEFAULT_TOL) -> PowerAllocation:
    """Max-min small-cell powers; bisection on the common effective mean SINR.

    The small-cell rate is increasing in the effective SINR, so maximizing
    the smallest SINR maximizes the smallest rate.
    """
    model = smallcell_model(system, est_var, beta, serving_ap, rho)
    p, rate, bounds, trace, ok = _solve_linear(model, eps, tol, smallcell_rate)
    alloc = PowerAllocation(achieved_min_rate=rate, converged=ok, iterations=len(trace), t_bounds=bounds, trace=trace)
    if system == "dl":
        alloc.alpha_dl = p
    else:
        alloc.alpha_ul = p
    return alloc


# ---------------------------------------------------------------------------
# Cell-free downlink: second-order cone feasibility


class DownlinkSocp:
    """Parametrized cone program for the downlink feasibility test.

    Variables are scaled as ``x[m, k] = sqrt(gamma[m, k] eta[m, k])`` so the
    per-AP budget reads ``||x[m, :]|| <= theta[m] <= 1``. The per-user cone
    (multiplied through by ``sqrt(rho_d)``) is

        || [sqrt(gram2) r[:, k]; sqrt(rho_d beta[:, k]) theta; 1] ||
            <= t^(-1/2) sum_m sqrt(rho_d gamma[m, k]) x[m, k]

    with ``r[j, k] >= sum_m sqrt(rho_d gamma[m, j]) beta[m, k] / beta[m, j] x[m, j]``
    for every pilot-sharing pair. The program is compiled once and
    re-solved for each ``t``.
    """

    def __init__(self, gamma, beta, gram2, rho_d, solver=DEFAULT_SOLVER, solver_opts=None):
        self.gamma = np.asarray(gamma, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.gram2 = np.asarray(gram2, dtype=float)
        self.rho_d = float(rho_d)
        self.solver = solver
        if solver_opts is None:
            solver_opts = dict(DEFAULT_SOLVER_OPTS) if solver == DEFAULT_SOLVER else {}
        self.solver_opts = solver_opts
        M, K = self.gamma.shape
        mask = self.gram2 * (1.0 - np.eye(K))

        x = cp.Variable((M, K), nonneg=True)
        theta = cp.Variable(M, nonneg=True)
        r = cp.Variable((K, K), nonneg=True)
        self.inv_sqrt_t = cp.Parameter(nonneg=True)

        a = np.sqrt(self.rho_d * self.gamma)
        constraints = [theta <= 1, cp.SOC(theta, x, axis=1)]
        for j in range(K):
            ks = np.flatnonzero(mask[j])
            if ks.size == 0:
                continue
            weights = a[:, [j]] * self.beta[:, ks] / self.beta[:, [j]]
            constraints.append(r[j, ks] >= x[:, j] @ weights)
        stacked = cp.vstack(
            [
                cp.multiply(np.sqrt(mask), r),
                cp.multiply(np.sqrt(self.rho_d * self.beta), cp.reshape(theta, (M, 1), order="F") @ np.ones((1, K))),
                np.ones((1, K)),
            ]
        )
        useful = cp.sum(cp.multiply(a, x), axis=0)
        constraints.append(cp.SOC(self.inv_sqrt_t * useful, stacked, axis=0))
        self.problem = cp.Problem(cp.Minimize(0), constraints)
        self.x, self.theta, self.r = x, theta, r

    def eta_from_x(self, x):
        x = np.clip(np.nan_to_num(x), 0.0, None)
        norms = np.linalg.norm(x, axis=1)
        x = x / np.maximum(norms, 1.0)[:, None]
        return x**2 / self.gamma

    def sinr(self, eta):
        return dl_sinr_cellfree(self.beta, self.gamma, eta, self.gram2, self.rho_d)

    def check(self, t, tol=DEFAULT_TOL) -> FeasibilityCertificate:
        self.inv_sqrt_t.value = 1.0 / math.sqrt(t)
        try:
            with warnings.catch_warnings():
                # inaccurate solutions are screened by the residual check below
                warnings.simplefilter("ignore", UserWarning)
                self.problem.solve(solver=self.solver, **self.solver_opts)
        except cp.error.SolverError as exc:
            log.warning("cone solver failed at t=%.6g: %s", t, exc)
            return FeasibilityCertificate(False, "indeterminate", float("inf"))
        status = self.problem.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return FeasibilityCertificate(False, "infeasible", float("inf"))
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or self.x.value is None:
            return FeasibilityCertificate(False, "indeterminate", float("inf"))
        eta = self.eta_from_x(self.x.value)
        residual = max(0.0, float(np.max((t - self.sinr(eta)) / t)))
        witness = {
            "eta": eta,
            "varsigma": np.sqrt(eta),
            "theta": np.clip(self.theta.value, 0.0, 1.0),
            "varrho": self.r.value / math.sqrt(self.rho_d),
        }
        if residual <= tol:
            return FeasibilityCertificate(True, "feasible", residual, witness)
        # a solver "optimal" whose witness misses the target is only near-feasible
        status = "infeasible" if status == cp.OPTIMAL else "indeterminate"
        return FeasibilityCertificate(False, status, residual, witness)

    def upper_bound(self) -> float:
        """Interference-free SINR cap, minimized over users.

        User ``k`` alone with every AP's full budget obeys both
        ``SINR_k <= rho_d (sum_m sqrt(gamma_mk))^2`` and, by Cauchy-Schwarz
        against its own gain-uncertainty term,
        ``SINR_k <= rho_d (sum_m gamma_mk / beta_mk) S / (rho_d S + 1)`` with
        ``S = sum_m beta_mk``.
        """
        plain = self.rho_d * np.sum(np.sqrt(self.gamma), axis=0) ** 2
        S = np.sum(self.beta, axis=0)
        cs = self.rho_d * np.sum(self.gamma / self.beta, axis=0) * S / (self.rho_d * S + 1.0)
        return float(np.min(np.minimum(plain, cs)))


def dl_feasible_cellfree(t, gamma, beta, gram2, rho_d, tol=DEFAULT_TOL, solver=DEFAULT_SOLVER) -> FeasibilityCertificate:
    """Decide whether every user can reach downlink SINR ``t`` simultaneously."""
    if not t > 0:
        raise ValueError("SINR target must be positive")
    return DownlinkSocp(gamma, beta, gram2, rho_d, solver).check(t, tol)


def equalize_downlink(eta, sinr_fn, target, window, max_rounds=20000):
    """Scale each user's coefficients down until all SINRs sit in ``[target, target (1 + window)]``.

    Shrinking user ``k``'s beam by ``s`` multiplies its SINR by at least
    ``s^2`` and never lowers anyone else's, so setting ``s^2 = target / SINR_k``
    keeps every user at or above ``target`` while the spread contracts.
    """
    eta = eta.copy()
    for _ in range(max_rounds):
        sinr = sinr_fn(eta)
        high = sinr > target * (1.0 + window)
        if not np.any(high):
            break
        scale = np.where(high, target / sinr, 1.0)
        eta *= scale[None, :]
    return eta


def dl_maxmin_cellfree(gamma, beta, gram2, rho_d, eps=DEFAULT_EPS, tol=DEFAULT_TOL, solver=DEFAULT_SOLVER) -> PowerAllocation:
    """Max-min downlink power control for cell-free operation.

    Bisection on the common SINR target with a cone feasibility program per
    step. The coefficients of the last feasible witness are then equalized
    so every user ends within ``eps`` (relative SINR) of the achieved level.
    """
    socp = DownlinkSocp(gamma, beta, gram2, rho_d, solver)
    base = no_power_control(np.asarray(gamma)).eta_dl
    base_sinr = socp.sinr(base)
    t_lo = float(np.min(base_sinr))
    t_hi = max(socp.upper_bound(), t_lo)

    def check(t):
        cert = socp.check(t, tol)
        if not cert.feasible:
            return cert.status, cert.residual, None, t
        eta = cert.witness["eta"]
        return cert.status, cert.residual, eta, float(np.min(socp.sinr(eta)))

    t_lo, t_hi_end, eta, trace, indeterminate = _bisect(check, t_lo, t_hi, eps)
    if eta is None:
        eta = base
    target = float(np.min(socp.sinr(eta)))
    eta = equalize_downlink(eta, socp.sinr, target, 0.5 * eps)
    sinr = socp.sinr(eta)
    return PowerAllocation(
        eta_dl=eta,
        achieved_min_rate=float(np.log2(1.0 + np.min(sinr))),
        converged=indeterminate == 0,
        iterations=len(trace),
        t_bounds=(t_lo, t_hi_end),
        trace=trace,
    )
