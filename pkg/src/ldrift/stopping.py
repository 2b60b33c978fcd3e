"""Path functionals: first exits, hitting times, occupation clocks, tube crossings.

The per-path functions act on materialized :class:`~ldrift.simulate.Path`
objects.  :func:`walk_ensemble` evaluates the same functionals for large
ensembles through the fused compiled walker without storing paths; both
routes see identical trajectories because they share the counter-based
random numbers.

Exits and hits are detected at grid times.  For the walker an optional
Brownian-bridge test also catches boundary crossings between grid times.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _engine
from ._engine import ABORTED, CENSORED, EXITED, HIT, KILLED, HistGrid
from .fields import truncate_drift
from .regions import Annulus, Ball, BallComplement, Cylinder, EmptyRegion, GridRegion, Halfspace, Region
from .simulate import SimConfig, StepOverflowError

__all__ = [
    "Region",
    "Ball",
    "Annulus",
    "Cylinder",
    "BallComplement",
    "Halfspace",
    "GridRegion",
    "EmptyRegion",
    "PreconditionError",
    "ExitRecord",
    "TubeOutcome",
    "first_exit",
    "hitting_time",
    "occupation",
    "tube_crossing",
    "EnsembleResult",
    "walk_ensemble",
    "HistGrid",
]


class PreconditionError(ValueError):
    """A path functional was applied outside its domain of definition."""


@dataclass(frozen=True)
class ExitRecord:
    """First exit from a region; ``exit_time`` is ``inf`` when censored at the horizon."""

    exit_time: float
    exit_position: np.ndarray
    censored: bool
    crossing_face: Optional[str] = None
    step: Optional[int] = None


@dataclass(frozen=True)
class TubeOutcome:
    """``kind`` is one of success, side-failure, back-failure, censored."""

    kind: str
    exit_time: float = math.inf
    exit_position: Optional[np.ndarray] = None

    @property
    def success(self):
        return self.kind == "success"


def first_exit(path, region):
    """First grid time at which the path is outside the closed region."""
    inside = region.contains(path.positions)
    if not inside[0]:
        raise PreconditionError("path starts outside the region")
    out = np.flatnonzero(~inside)
    if out.size == 0:
        return ExitRecord(math.inf, path.positions[-1].copy(), True, None, None)
    k = int(out[0])
    pos = path.positions[k].copy()
    face = region.face(pos) if isinstance(region, Cylinder) else None
    return ExitRecord(float(path.times[k]), pos, False, face, k)


def hitting_time(path, target):
    """First grid time with the path in the closed target; ``inf`` if never."""
    hit = np.flatnonzero(target.contains(path.positions))
    return float(path.times[hit[0]]) if hit.size else math.inf


def occupation(path, region, stop=None):
    """``dt * #{k : t_k < stop, x_k in region}``.

    ``stop`` is a time, an :class:`ExitRecord` (a censored record stops at the
    horizon) or ``None`` for the full horizon.
    """
    horizon = float(path.times[-1])
    if stop is None:
        t_stop = horizon
    elif isinstance(stop, ExitRecord):
        t_stop = horizon if stop.censored else stop.exit_time
    else:
        t_stop = float(stop)
    if t_stop > horizon * (1 + 1e-12) or t_stop < 0:
        raise PreconditionError(f"stop time {t_stop} outside [0, {horizon}]")
    dt = path.dt
    n = int(math.ceil(t_stop / dt - 1e-9))
    return dt * int(np.count_nonzero(region.contains(path.positions[:n])))


def _classify_tube(cyl, kappa, pos, exited):
    if not exited:
        return "censored"
    face = cyl.face(pos)
    if face == "far-end":
        # leaving through the far cap outside the small disc does not count as success
        return "success" if np.linalg.norm(pos[1:]) < (1.0 - kappa) * cyl.radius else "side-failure"
    return "back-failure" if face == "near-end" else "side-failure"


def _check_tube_start(cyl, kappa, x0):
    if not 0.5 <= kappa < 1.0:
        raise PreconditionError("kappa must lie in [1/2, 1)")
    x0 = np.asarray(x0, float)
    R = cyl.radius
    if abs(x0[0] - R) > 1e-9 * R or np.linalg.norm(x0[1:]) > kappa * R * (1 + 1e-12):
        raise PreconditionError("tube start must be (R, x') with |x'| <= kappa R")


def tube_crossing(path, cylinder, kappa):
    """Classify the first exit of the path from the cylinder.

    Success means leaving through the far end ``{nR} x {|x'| < (1 - kappa) R}``.
    """
    _check_tube_start(cylinder, kappa, path.positions[0])
    rec = first_exit(path, cylinder)
    kind = _classify_tube(cylinder, kappa, rec.exit_position, not rec.censored)
    return TubeOutcome(kind, rec.exit_time if kind == "success" else math.inf, rec.exit_position)


# ---------------------------------------------------------------------------
# ensembles through the fused walker


@dataclass
class EnsembleResult:
    """Reduced statistics of an ensemble run; see :func:`walk_ensemble`."""

    raw: _engine.WalkResult
    config: SimConfig
    domain: Optional[Region]
    target: Optional[Region]

    @property
    def dt(self):
        return self.config.dt

    @property
    def n_paths(self):
        return self.raw.n_paths

    @property
    def exited(self):
        return self.raw.status == EXITED

    @property
    def censored(self):
        return self.raw.status == CENSORED

    @property
    def hit(self):
        return self.raw.hit_step >= 0

    @property
    def n_aborted(self):
        return self.raw.count(ABORTED)

    @property
    def n_killed(self):
        return self.raw.count(KILLED)

    @property
    def censored_fraction(self):
        return float(np.mean(self.censored))

    @property
    def exit_times(self):
        """Exit times, ``inf`` where the path did not exit."""
        return np.where(self.exited, self.raw.end_step * self.dt, np.inf)

    @property
    def stop_times(self):
        """Time at which each path stopped (exit, hit, kill or horizon)."""
        return self.raw.end_step * self.dt

    @property
    def hit_times(self):
        return np.where(self.hit, self.raw.hit_step * self.dt, np.inf)

    @property
    def occupation(self):
        return self.raw.occupation

    @property
    def discounted_time(self):
        return self.raw.discounted_time

    @property
    def drift_integral(self):
        return self.raw.drift_integral

    @property
    def max_step(self):
        return self.raw.max_step

    @property
    def end_positions(self):
        return self.raw.end_pos

    @property
    def checkpoints(self):
        return self.raw.checkpoints

    def histogram(self, i=0):
        """``(sum, sum of squares)`` of per-path weighted cell occupation for grid ``i``."""
        return self.raw.hist_sum[i], self.raw.hist_sq[i]

    def exit_faces(self):
        if not isinstance(self.domain, Cylinder):
            raise TypeError("exit faces are defined for cylinder domains")
        return [self.domain.face(p) if e else None for p, e in zip(self.end_positions, self.exited)]

    def tube_outcomes(self, kappa):
        """Per-path tube classification (cylinder domain)."""
        cyl = self.domain
        if not isinstance(cyl, Cylinder):
            raise TypeError("tube outcomes need a cylinder domain")
        return np.array([_classify_tube(cyl, kappa, p, e) for p, e in zip(self.end_positions, self.exited)])

    def require_clean(self, max_censored=None):
        """Raise if any path aborted or if too many were censored."""
        if self.n_aborted:
            raise StepOverflowError(f"{self.n_aborted} paths produced non-finite states")
        if max_censored is not None and self.censored_fraction > max_censored:
            raise PreconditionError(
                f"censored fraction {self.censored_fraction:.2e} exceeds {max_censored:.0e}; extend the horizon"
            )
        return self


_DISCOUNT = {None: _engine.DISCOUNT_NONE, "none": _engine.DISCOUNT_NONE, "weight": _engine.DISCOUNT_WEIGHT, "kill": _engine.DISCOUNT_KILL}


def walk_ensemble(
    config,
    drift,
    diffusion,
    *,
    domain=None,
    target=None,
    stop_on_hit=False,
    bridge=False,
    occupation_sets=(),
    discount=None,
    lam=0.0,
    clock_radius=0.0,
    checkpoint_times=(),
    grids=(),
    workers=None,
):
    """Run an ensemble and reduce path functionals on the fly.

    Parameters
    ----------
    config : SimConfig
        Time step, horizon, path count, seed, start point and drift cap.
    domain : Ball, Cylinder or Halfspace, optional
        Paths stop at their first exit.
    target : Ball or Halfspace, optional
        First hitting step is recorded; with ``stop_on_hit`` paths stop there.
    bridge : bool
        Also detect crossings between grid times with the Brownian-bridge
        crossing probability (exact for flat faces and constant diffusion).
    occupation_sets : sequence of Ball
        Weighted time spent in each ball before stopping.
    discount : {None, "weight", "kill"}
        ``"weight"`` multiplies step weights by ``exp(-lam t)``; ``"kill"``
        ends each path at an independent exponential clock of rate ``lam``
        (the same expectation with far fewer steps).  With ``clock_radius``
        the clock only runs outside that ball.
    checkpoint_times : sequence of float
        Positions recorded at these times (NaN after a path stops).
    grids : sequence of HistGrid
        Weighted occupation histograms (per-cell sums and sums of squares over paths).
    """
    d = config.dim
    x0 = np.asarray(config.start_point, float)
    if domain is not None and not domain.contains(x0):
        raise PreconditionError("start point outside the domain")
    capped = truncate_drift(drift, config.cap) if math.isfinite(config.cap) else drift
    if discount not in _DISCOUNT:
        raise ValueError(f"unknown discount mode {discount!r}")
    if _DISCOUNT[discount] != _engine.DISCOUNT_NONE and not lam > 0:
        raise ValueError("discounting needs lam > 0")
    occ = []
    for s in occupation_sets:
        if not isinstance(s, Ball):
            raise TypeError("occupation sets must be balls")
        occ.append((tuple(s.center), float(s.radius)))
    steps = sorted(int(round(t / config.dt)) for t in checkpoint_times)
    spec = _engine.WalkSpec(
        x0=x0,
        dt=config.dt,
        n_steps=config.n_steps,
        n_paths=config.n_paths,
        seed=int(config.master_seed),
        stop=domain.engine_spec() if domain is not None else (0, ()),
        target=target.engine_spec() if target is not None else (0, ()),
        stop_on_hit=stop_on_hit,
        bridge=bridge,
        occupation_balls=occ,
        discount=_DISCOUNT[discount],
        lam=float(lam),
        clock_radius=float(clock_radius),
        checkpoints=steps,
        grids=list(grids),
    )
    if isinstance(domain, Cylinder) and domain.dim != d:
        raise ValueError("cylinder dimension does not match the start point")
    raw = _engine.run_walk(spec, capped, diffusion, workers=workers)
    return EnsembleResult(raw, config, domain, target)
