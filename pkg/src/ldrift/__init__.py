"""Monte Carlo laboratory for diffusions with L_d drift.

Euler-Maruyama simulation of ``dx = sigma(x) dw + b(x) dt`` with a truncated
drift, stopping-time and occupation functionals, Green density estimates,
the ink-spot set-growth construction, Brownian closed-form oracles and an
experiment registry with pre-registered verdicts.
"""

from .fields import (
    DriftField,
    DiffusionField,
    ld_norm,
    ld_norm_report,
    make_diffusion_field,
    make_example_field,
    rescale_field,
    truncate_drift,
)
from .green import (
    GreenEstimate,
    estimate_domain_green,
    estimate_green_density,
    estimate_resolvent,
)
from .inkspots import GridSet, grow_set, iterate_growth
from .regions import Annulus, Ball, BallComplement, Cylinder, EmptyRegion, GridRegion, Halfspace
from .simulate import SimConfig, TestFunction, martingale_residual, simulate_ensemble, simulate_path
from .stopping import EnsembleResult, HistGrid, PreconditionError, walk_ensemble

__version__ = "0.1.0"

__all__ = [
    "DriftField",
    "DiffusionField",
    "ld_norm",
    "ld_norm_report",
    "make_diffusion_field",
    "make_example_field",
    "rescale_field",
    "truncate_drift",
    "GreenEstimate",
    "estimate_domain_green",
    "estimate_green_density",
    "estimate_resolvent",
    "GridSet",
    "grow_set",
    "iterate_growth",
    "Annulus",
    "Ball",
    "BallComplement",
    "Cylinder",
    "EmptyRegion",
    "GridRegion",
    "Halfspace",
    "SimConfig",
    "TestFunction",
    "martingale_residual",
    "simulate_ensemble",
    "simulate_path",
    "EnsembleResult",
    "HistGrid",
    "PreconditionError",
    "walk_ensemble",
]
