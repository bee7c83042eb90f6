"""
skewdiff: classification and simulation of countably skewed Brownian motion.
"""

__version__ = "0.1.0"
__author__ = "skewdiff developers"

from .classifier import classify_all
from .config import SkewConfig, validate
from .ingest import ingest, load_config, load_layers
from .layered import build_layered, classify_layered, simulate_xy
from .scale import build_scale, hitting_prob, mean_exit_time, speed_and_invariant
from .simulation import SimPlan, mc_exit_time, mc_hitting, simulate_path

__all__ = [
    "SkewConfig", "validate", "ingest", "load_config", "load_layers",
    "classify_all", "build_scale", "hitting_prob", "mean_exit_time", "speed_and_invariant",
    "SimPlan", "simulate_path", "mc_hitting", "mc_exit_time",
    "build_layered", "classify_layered", "simulate_xy",
]
