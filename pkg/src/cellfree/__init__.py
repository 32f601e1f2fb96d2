"""Cell-free massive MIMO versus small-cell system simulator."""

from .channel_stats import PilotPlan, make_pilot_plan
from .config import ConfigError, SimConfig, load_config, parse_config
from .harness import Scenario, run_experiment
from .power_control import (
    PowerAllocation,
    dl_maxmin_cellfree,
    no_power_control,
    smallcell_maxmin,
    ul_maxmin_cellfree,
)
from .rates import RateVector

__all__ = [
    "ConfigError",
    "PilotPlan",
    "PowerAllocation",
    "RateVector",
    "Scenario",
    "SimConfig",
    "dl_maxmin_cellfree",
    "load_config",
    "make_pilot_plan",
    "no_power_control",
    "parse_config",
    "run_experiment",
    "smallcell_maxmin",
    "ul_maxmin_cellfree",
]

__version__ = "0.1.0"
