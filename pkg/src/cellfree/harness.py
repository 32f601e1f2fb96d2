"""Monte Carlo experiments over random drops and their file outputs."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import cvxpy as cp
import numpy as np

from .channel_stats import cellfree_estimation_stats, make_pilot_plan
from .config import SimConfig
from .geometry import build_layout
from .pilots import greedy_assign_cellfree, random_assignment
from .power_control import dl_maxmin_cellfree, no_power_control, ul_maxmin_cellfree
from .propagation import draw_shadowing, large_scale_matrix, noise_and_snrs
from .rates import SYSTEMS, dl_rate_cellfree, genie_dl_rate_mc, ul_rate_cellfree
from .smallcell import run_smallcell_drop

log = logging.getLogger(__name__)

# child stream indices under each drop's seed
STREAM_LAYOUT, STREAM_SHADOW, STREAM_CF_PILOTS, STREAM_SMALLCELL = range(4)

FAILURE_ALARM = 0.02


def drop_seed(rng_seed: int, drop: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=rng_seed, spawn_key=(drop, stream))


@dataclass(frozen=True)
class Scenario:
    power_control: bool = True
    greedy: bool = True
    correlated: bool = False

    @property
    def name(self) -> str:
        return "-".join(
            [
                "greedy" if self.greedy else "random",
                "pc" if self.power_control else "nopc",
                "corr" if self.correlated else "uncorr",
            ]
        )

    @classmethod
    def from_name(cls, name: str) -> "Scenario":
        parts = name.strip().lower().split("-")
        choices = ({"greedy": True, "random": False}, {"pc": True, "nopc": False}, {"corr": True, "uncorr": False})
        if len(parts) != 3 or any(p not in c for p, c in zip(parts, choices)):
            raise ValueError(f"scenario must look like 'greedy-pc-uncorr', got {name!r}")
        greedy, pc, corr = (c[p] for p, c in zip(parts, choices))
        return cls(power_control=pc, greedy=greedy, correlated=corr)


@dataclass
class DropResult:
    drop_index: int
    throughput: dict[str, np.ndarray] = field(default_factory=dict)
    effective_ap_count: np.ndarray | None = None
    converged: bool = True
    bisection_steps: int = 0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class CdfSummary:
    x: np.ndarray
    F: np.ndarray
    p5: float
    p50: float


@dataclass
class ExperimentResult:
    config: SimConfig
    scenario: Scenario
    drops: list[DropResult]
    samples: dict[str, np.ndarray]
    cdfs: dict[str, CdfSummary]

    @property
    def failed_drops(self) -> list[int]:
        return [d.drop_index for d in self.drops if d.failed]

    def summary(self) -> dict:
        n_failed = len(self.failed_drops)
        return {
            "scenario": self.scenario.name,
            "n_drops": len(self.drops),
            "failed_drops": n_failed,
            "failure_alarm": n_failed > FAILURE_ALARM * len(self.drops),
            "unconverged_drops": sum(1 for d in self.drops if not d.failed and not d.converged),
            "systems": {
                s: {"p5_bps": c.p5, "median_bps": c.p50, "n_samples": int(len(c.x))} for s, c in self.cdfs.items()
            },
        }


def net_throughput(rate, B: float, tau_train: int, tau_c: int):
    """Net throughput in bit/s, charging training overhead and a half-half DL/UL split."""
    if tau_train >= tau_c:
        raise ValueError(f"training length {tau_train} leaves no payload in a {tau_c}-sample block")
    return B * (1.0 - tau_train / tau_c) / 2.0 * np.asarray(rate)


def effective_ap_count(eta_dl, gamma, threshold: float = 0.95) -> np.ndarray:
    """Per user, the fewest APs that together carry ``threshold`` of its downlink power."""
    power = np.asarray(eta_dl) * np.asarray(gamma)
    share = power / np.sum(power, axis=0, keepdims=True)
    cum = np.cumsum(-np.sort(-share, axis=0), axis=0)
    # tolerance keeps exact-sum cases such as 95 x 0.01 from slipping by an ulp
    return 1 + np.sum(cum < threshold - 1e-12, axis=0)


def cdf_and_percentiles(samples) -> CdfSummary:
    """Empirical CDF; percentiles by linear interpolation between order statistics."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("no samples")
    F = np.arange(1, x.size + 1) / x.size
    p5, p50 = np.percentile(x, [5.0, 50.0])
    return CdfSummary(x=x, F=F, p5=float(p5), p50=float(p50))


def _cellfree(beta, config, scenario, snr, seed):
    K = beta.shape[1]
    tau = config.tau_cf
    if scenario.greedy:
        plan = greedy_assign_cellfree(beta, tau, snr.rho_d_cf, snr.rho_p_cf, config.n_greedy, seed)
    else:
        plan = make_pilot_plan(tau, random_assignment(K, tau, seed))
    gamma = cellfree_estimation_stats(beta, plan, snr.rho_p_cf).gamma
    steps, converged = 0, True
    if scenario.power_control:
        dl = dl_maxmin_cellfree(gamma, beta, plan.gram2, snr.rho_d_cf)
        ul = ul_maxmin_cellfree(gamma, beta, plan.gram2, snr.rho_u_cf)
        eta_dl, eta_ul = dl.eta_dl, ul.eta_ul
        steps, converged = dl.iterations + ul.iterations, dl.converged and ul.converged
    else:
        base = no_power_control(gamma)
        eta_dl, eta_ul = base.eta_dl, base.eta_ul
    r_dl = dl_rate_cellfree(beta, gamma, eta_dl, plan.gram2, snr.rho_d_cf).per_user_rate
    r_ul = ul_rate_cellfree(beta, gamma, eta_ul, plan.gram2, snr.rho_u_cf).per_user_rate
    return r_dl, r_ul, effective_ap_count(eta_dl, gamma), steps, converged


def run_drop(config: SimConfig, scenario: Scenario, drop: int) -> DropResult:
    """One drop of both systems on a common geometry and shadowing."""
    seed = config.rng_seed
    layout = build_layout(config, drop_seed(seed, drop, STREAM_LAYOUT))
    shadow_seed = drop_seed(seed, drop, STREAM_SHADOW)
    shadowing = None
    if scenario.correlated:
        shadowing = draw_shadowing(layout, config.delta, config.d_decorr, shadow_seed)
    beta = large_scale_matrix(layout, config, shadowing=shadowing, seed=shadow_seed).beta
    snr = noise_and_snrs(config)
    result = DropResult(drop_index=drop)
    try:
        r_dl, r_ul, counts, steps, converged = _cellfree(
            beta, config, scenario, snr, drop_seed(seed, drop, STREAM_CF_PILOTS)
        )
        sc = run_smallcell_drop(
            beta,
            config,
            seed=drop_seed(seed, drop, STREAM_SMALLCELL),
            use_power_control=scenario.power_control,
            use_greedy_pilots=scenario.greedy,
        )
    except (cp.error.SolverError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.warning("drop %d failed: %s", drop, exc)
        result.error = f"{type(exc).__name__}: {exc}"
        return result
    B, tc = config.B, config.tau_c
    tau_sc = config.tau_sc_dl + config.tau_sc_ul
    result.throughput = {
        "cf-dl": net_throughput(r_dl, B, config.tau_cf, tc),
        "cf-ul": net_throughput(r_ul, B, config.tau_cf, tc),
        "sc-dl": net_throughput(sc.rates_dl.per_user_rate, B, tau_sc, tc),
        "sc-ul": net_throughput(sc.rates_ul.per_user_rate, B, tau_sc, tc),
    }
    result.effective_ap_count = counts
    result.bisection_steps = steps + sc.alloc.iterations
    result.converged = converged and sc.alloc.converged
    return result


def _run_drop_args(args):
    return run_drop(*args)


def run_experiment(config: SimConfig, scenario: Scenario, workers: int = 1, progress=None) -> ExperimentResult:
    """Run ``config.n_drops`` drops and pool their throughputs.

    With power control every user of a drop gets the same rate, so each
    drop contributes one sample (its minimum) per system; without power
    control every user is a sample. Results do not depend on ``workers``.
    """
    config.validate()
    jobs = [(config, scenario, d) for d in range(config.n_drops)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            drops = list(pool.map(_run_drop_args, jobs))
    else:
        drops = []
        for job in jobs:
            drops.append(run_drop(*job))
            if progress is not None:
                progress(drops[-1])
    ok = [d for d in drops if not d.failed]
    if not ok:
        raise RuntimeError("every drop failed")
    samples = {}
    for system in SYSTEMS:
        if scenario.power_control:
            samples[system] = np.array([np.min(d.throughput[system]) for d in ok])
        else:
            samples[system] = np.concatenate([d.throughput[system] for d in ok])
    cdfs = {s: cdf_and_percentiles(v) for s, v in samples.items()}
    n_failed = len(drops) - len(ok)
    if n_failed > FAILURE_ALARM * len(drops):
        log.warning("%d of %d drops failed", n_failed, len(drops))
    return ExperimentResult(config=config, scenario=scenario, drops=drops, samples=samples, cdfs=cdfs)


# ---------------------------------------------------------------------------
# outputs


def write_raw_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["drop", "user", "system", "throughput_bps"])
        for d in result.drops:
            for system in SYSTEMS:
                for k, value in enumerate(d.throughput.get(system, ())):
                    writer.writerow([d.drop_index, k, system, repr(float(value))])


def read_raw_csv(path) -> dict[str, dict[int, list[float]]]:
    """Per system, per drop, the user throughputs in file order."""
    out: dict[str, dict[int, list[float]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["system"], {}).setdefault(int(row["drop"]), []).append(float(row["throughput_bps"]))
    return out


def write_cdf_csv(cdfs: dict[str, CdfSummary], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["system", "throughput_bps", "cdf"])
        for system, c in cdfs.items():
            for x, F in zip(c.x, c.F):
                writer.writerow([system, repr(float(x)), repr(float(F))])


def write_effective_aps_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["drop", "user", "effective_aps"])
        for d in result.drops:
            if d.effective_ap_count is None:
                continue
            for k, n in enumerate(d.effective_ap_count):
                writer.writerow([d.drop_index, k, int(n)])


def write_outputs(result: ExperimentResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_raw_csv(result, out / "raw.csv")
    write_cdf_csv(result.cdfs, out / "cdf.csv")
    write_effective_aps_csv(result, out / "effective_aps.csv")
    with open(out / "summary.json", "w") as fh:
        json.dump(result.summary(), fh, indent=2)
    return out


def cdf_from_raw(raw_path, pool_min: bool = False) -> dict[str, CdfSummary]:
    """CDFs from a raw throughput file; ``pool_min`` keeps one value (the minimum) per drop."""
    raw = read_raw_csv(raw_path)
    cdfs = {}
    for system, per_drop in raw.items():
        if pool_min:
            values = [min(v) for v in per_drop.values()]
        else:
            values = [x for v in per_drop.values() for x in v]
        cdfs[system] = cdf_and_percentiles(values)
    return cdfs


# ---------------------------------------------------------------------------
# channel hardening curve

HARDEN_RHO_D = 10.0  # 10 dB
HARDEN_RHO_P = 1.0  # 0 dB


def harden_curve(M_values, K_values, n_samples: int = 10_000, seed: int = 0) -> list[dict]:
    """Statistical-CSI rate against the genie-aided rate for unit gains.

    Orthogonal pilots (``tau = K``), ``beta = 1`` and ``eta = 1 / (K gamma)``.
    All users are statistically identical, so the per-user values are
    averaged.
    """
    rows = []
    for K in K_values:
        plan = make_pilot_plan(K, np.arange(K))
        for M in M_values:
            beta = np.ones((M, K))
            gamma = cellfree_estimation_stats(beta, plan, HARDEN_RHO_P).gamma
            eta = 1.0 / (K * gamma)
            closed = dl_rate_cellfree(beta, gamma, eta, plan.gram2, HARDEN_RHO_D).per_user_rate
            genie = genie_dl_rate_mc(beta, eta, plan, HARDEN_RHO_D, HARDEN_RHO_P, n_samples, seed)
            rows.append(
                {
                    "M": M,
                    "K": K,
                    "closed_form": float(np.mean(closed)),
                    "genie": float(np.mean(genie.per_user_rate)),
                    "genie_stderr": float(np.sqrt(np.mean(genie.stderr**2)) / math.sqrt(K)),
                }
            )
    return rows
