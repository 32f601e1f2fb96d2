"""Scenario parameters and the flat key-value config file loader."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Raised when a SimConfig violates one of its invariants."""


@dataclass(frozen=True)
class SimConfig:
    """Every physical and protocol parameter of one scenario.

    Distances are in km, the carrier in MHz, antenna heights in m,
    powers in W and the bandwidth in Hz. Defaults reproduce the
    reference deployment (M=100 APs, K=40 users on a 1 km square).
    """

    M: int = 100
    K: int = 40
    D: float = 1.0
    d0: float = 0.01
    d1: float = 0.05
    f: float = 1900.0
    hAP: float = 15.0
    hu: float = 1.65
    sigma_sh: float = 8.0
    delta: float = 0.5
    d_decorr: float = 0.1
    shadowing_correlated: bool = False
    B: float = 20e6
    noise_figure_db: float = 9.0
    p_dl: float = 0.2
    p_ul: float = 0.1
    p_pilot: float = 0.1
    tau_c: int = 200
    tau_cf: int = 20
    tau_sc_dl: int = 20
    tau_sc_ul: int = 20
    # None means 2K greedy iterations
    greedy_iters: int | None = None
    n_drops: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("M", "K", "n_drops", "tau_c", "tau_cf", "tau_sc_dl", "tau_sc_ul"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        for name in ("D", "d0", "d1", "f", "hAP", "hu", "B", "p_dl", "p_ul", "p_pilot", "d_decorr"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive, got {getattr(self, name)}")
        if not self.d0 <= self.d1 < self.D:
            raise ConfigError(f"need 0 < d0 <= d1 < D, got d0={self.d0}, d1={self.d1}, D={self.D}")
        if not self.tau_cf < self.tau_c:
            raise ConfigError("cell-free training length must be shorter than the coherence interval")
        if not self.tau_sc_dl + self.tau_sc_ul < self.tau_c:
            raise ConfigError("small-cell training lengths must fit inside the coherence interval")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigError(f"delta must lie in [0, 1], got {self.delta}")
        if self.sigma_sh < 0:
            raise ConfigError("sigma_sh must be nonnegative")
        if self.greedy_iters is not None and self.greedy_iters < 0:
            raise ConfigError("greedy_iters must be nonnegative")

    @property
    def n_greedy(self) -> int:
        return 2 * self.K if self.greedy_iters is None else self.greedy_iters

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SimConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    if kind == "bool":
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: cannot parse boolean {raw!r}")
    if kind == "int | None":
        return None if raw.lower() in ("", "none") else int(raw)
    if kind == "int":
        return int(raw)
    return float(raw)


def parse_config(text: str) -> SimConfig:
    """Parse ``key = value`` lines (``#`` comments allowed) into a SimConfig.

    A leading ``[section]`` header is optional; all keys are read from the
    first section. Unknown keys are rejected.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = "[config]\n" + text
    parser.read_string(text)
    section = parser[parser.sections()[0]]
    values = {}
    for key, raw in section.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    return SimConfig(**values)


def load_config(path: str | Path) -> SimConfig:
    return parse_config(Path(path).read_text())


def dump_config(config: SimConfig) -> str:
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        lines.append(f"{f.name} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"
