"""Transmit-power optimization for self-sustainable RIS with tile-based energy harvesting."""

from .config import ConfigError, ScenarioConfig, bundled_config
from .geometry import CoverageArea, RisLayout, feasible_tile_counts, plan_codebook
from .optimizer import SchemeSolution, SystemModel, grid_search, random_rho_benchmark, verify_solution
from .rectifier import RectifierModel
from .schemes import ALL_SCHEMES, Scheme, Stage

__all__ = [
    "ALL_SCHEMES",
    "ConfigError",
    "CoverageArea",
    "RectifierModel",
    "RisLayout",
    "ScenarioConfig",
    "Scheme",
    "SchemeSolution",
    "Stage",
    "SystemModel",
    "bundled_config",
    "feasible_tile_counts",
    "grid_search",
    "plan_codebook",
    "random_rho_benchmark",
    "verify_solution",
]

__version__ = "0.1.0"
