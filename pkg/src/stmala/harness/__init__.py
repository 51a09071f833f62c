"""Data generation, diagnostics, experiment runner and command-line interface."""
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .data import gen_design, gen_observations, gen_truth
from .diagnostics import acf, error_curve, log_grid, test_mse
from .experiment import build_problem, run_experiment, run_sampler

__all__ = [
    "ConfigError", "ExperimentConfig", "load_config", "parse_config",
    "gen_design", "gen_observations", "gen_truth",
    "acf", "error_curve", "log_grid", "test_mse",
    "build_problem", "run_experiment", "run_sampler",
]
