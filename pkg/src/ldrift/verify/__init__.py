"""Brownian oracles, scaling fits and the experiment registry."""

from .fitting import FitError, ScalingFit, fit_line, fit_power_law
from .oracles import (
    OracleError,
    bm_confinement_rate,
    bm_domain_green_ball_mass,
    bm_exit_moment,
    bm_half_discounted,
    bm_hitting_prob,
    bm_laplace_exit,
    bm_occupation_ball,
    bm_resolvent_ball,
    bm_resolvent_kernel,
    bm_tube_rate,
    kernel_ball_mass,
)

_LAZY = {"REGISTRY", "run_experiment", "default_config", "ExperimentReport", "Check", "Quantity", "RegistryError", "load_thresholds"}

__all__ = [
    "FitError",
    "ScalingFit",
    "fit_line",
    "fit_power_law",
    "OracleError",
    "bm_confinement_rate",
    "bm_domain_green_ball_mass",
    "bm_exit_moment",
    "bm_half_discounted",
    "bm_hitting_prob",
    "bm_laplace_exit",
    "bm_occupation_ball",
    "bm_resolvent_ball",
    "bm_resolvent_kernel",
    "bm_tube_rate",
    "kernel_ball_mass",
    *sorted(_LAZY),
]


def __getattr__(name):
    # the registry imports green, which imports this package; load it on first use
    if name in _LAZY:
        from . import experiments

        return getattr(experiments, name)
    raise AttributeError(name)
