"""memsim: edge-market mechanism simulator.

Three mechanisms behind one seeded, reproducible harness: a replicator-
dynamics sensing market, a two-clock double auction for edge rendering with
pluggable clock-step controllers, and a two-stage stochastic reservation
planner with baselines.
"""

from .config import ConfigError, ConfigParseError, SimConfig, load_config, validate_config
from .rng import RngStream, rng_stream

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConfigParseError",
    "RngStream",
    "SimConfig",
    "__version__",
    "load_config",
    "rng_stream",
    "validate_config",
]
