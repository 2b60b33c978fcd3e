"""Euler-Maruyama paths with stored increments and residual diagnostics.

This is the reference engine: paths are materialized (positions plus the
Gaussian draws that produced them), fields may be arbitrary Python
callables, and diagnostics such as the Ito residual replay the exact
discrete stochastic integral.  Large ensembles that only need reduced
statistics go through the fused walker in :mod:`ldrift.stopping`, which uses the same random
numbers and therefore produces the same trajectories.
"""

import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numba as nb
import numpy as np

from . import rng
from .fields import DiffusionField, DriftField, eval_diffusion, sigma_apply, truncate_drift

__all__ = [
    "SimulationError",
    "StepOverflowError",
    "SimConfig",
    "Path",
    "TestFunction",
    "MartingaleCheck",
    "euler_step",
    "simulate_ensemble",
    "simulate_path",
    "ito_residual",
    "martingale_residual",
    "drift_integral",
    "write_path",
    "read_path",
]


class SimulationError(ValueError):
    """Invalid simulation input."""


class StepOverflowError(ArithmeticError):
    """An Euler step produced a non-finite state."""

    def __init__(self, message, state=None, path_index=None, step=None):
        super().__init__(message)
        self.state = state
        self.path_index = path_index
        self.step = step


@dataclass(frozen=True)
class SimConfig:
    """Discretization and ensemble parameters.

    ``truncation_level`` caps the drift magnitude; ``None`` selects the
    default coupling ``M = dt**-0.5``.
    """

    dt: float
    horizon: float
    n_paths: int = 1
    master_seed: int = 0
    start_point: Sequence[float] = (0.0, 0.0)
    truncation_level: Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise SimulationError("dt must be positive")
        if not self.horizon >= self.dt * (1 - 1e-12):
            raise SimulationError("horizon must be at least dt")
        if int(self.n_paths) < 1:
            raise SimulationError("n_paths must be at least 1")
        if self.truncation_level is not None and not self.truncation_level > 0:
            raise SimulationError("truncation level must be positive")
        if not 0 <= int(self.master_seed) < 2**64:
            raise SimulationError("master seed must fit in 64 bits")

    @property
    def n_steps(self):
        return max(1, int(round(self.horizon / self.dt)))

    @property
    def cap(self):
        return self.dt**-0.5 if self.truncation_level is None else float(self.truncation_level)

    @property
    def dim(self):
        return len(self.start_point)


@dataclass(eq=False)
class Path:
    """One discretized trajectory: ``positions[k]`` is the state at ``times[k]``."""

    times: np.ndarray
    positions: np.ndarray
    gaussians: np.ndarray
    seed: int
    index: int
    config: Optional[SimConfig] = None

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    @property
    def n_steps(self):
        return self.positions.shape[0] - 1

    @property
    def dim(self):
        return self.positions.shape[1]


# ---------------------------------------------------------------------------
# vectorized field application


@nb.njit(cache=True)
def _sigma_many(code, prm, scale, pts, xi, out):
    for k in range(pts.shape[0]):
        sigma_apply(code, prm, scale, pts[k], xi[k], out[k])


def _apply_sigma(diffusion, pts, xi):
    """Rows of ``sigma(pts[k]) @ xi[k]``."""
    if diffusion.kind == "identity":
        return xi.copy()
    if diffusion.compiled:
        out = np.empty_like(xi)
        _sigma_many(diffusion.code, diffusion.param_array, float(diffusion.scale), pts, xi, out)
        return out
    out = np.empty_like(xi)
    for k in range(pts.shape[0]):
        _, s = eval_diffusion(diffusion, pts[k], check=False)
        out[k] = s @ xi[k]
    return out


def _matrices(diffusion, pts):
    if diffusion.is_constant:
        a = diffusion.matrix(pts[0])
        return np.broadcast_to(a, (pts.shape[0],) + a.shape)
    return np.stack([diffusion.matrix(p) for p in pts])


def _check_dims(drift, diffusion, d):
    if drift.dim != d or diffusion.dim != d:
        raise SimulationError(f"dimension mismatch: start point {d}, drift {drift.dim}, diffusion {diffusion.dim}")


# ---------------------------------------------------------------------------
# stepping


def euler_step(x, drift, diffusion, dt, gaussian):
    """One explicit Euler-Maruyama step ``x + b(x) dt + sigma(x) sqrt(dt) xi``.

    The drift is evaluated as given; pass a truncated field for singular drifts.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    xi = np.asarray(gaussian, dtype=np.float64).reshape(-1)
    _check_dims(drift, diffusion, x.shape[0])
    b = drift.evaluate_many(x[None, :])[0]
    s = _apply_sigma(diffusion, x[None, :], xi[None, :])[0]
    with np.errstate(all="ignore"):
        y = x + b * dt + s * math.sqrt(dt)
    if not np.all(np.isfinite(y)):
        raise StepOverflowError(f"non-finite state after step from {tuple(x)}", state=x)
    return y


def _chunk_paths(config):
    budget = 4_000_000
    per = (config.n_steps + 1) * config.dim
    return int(max(1, min(config.n_paths, budget // max(per, 1))))


def simulate_ensemble(config, drift, diffusion):
    """Yield ``config.n_paths`` paths in index order.

    Path ``i`` is a pure function of ``(config, i)`` and the field
    specifications; the drift is capped at ``config.cap`` before stepping.
    """
    d = config.dim
    _check_dims(drift, diffusion, d)
    capped = truncate_drift(drift, config.cap) if math.isfinite(config.cap) else drift
    x0 = np.asarray(config.start_point, dtype=np.float64)
    K = config.n_steps
    dt = float(config.dt)
    sq = math.sqrt(dt)
    times = np.arange(K + 1) * dt
    chunk = _chunk_paths(config)
    for start in range(0, config.n_paths, chunk):
        idx = np.arange(start, min(config.n_paths, start + chunk))
        xi = rng.gaussians(config.master_seed, idx, K, d)
        pos = np.empty((idx.size, K + 1, d))
        pos[:, 0] = x0
        x = np.repeat(x0[None, :], idx.size, axis=0)
        for k in range(K):
            b = capped.evaluate_many(x)
            with np.errstate(all="ignore"):
                x = x + b * dt + _apply_sigma(diffusion, x, xi[:, k]) * sq
            bad = ~np.all(np.isfinite(x), axis=1)
            if np.any(bad):
                j = int(np.argmax(bad))
                raise StepOverflowError(
                    f"non-finite state in path {int(idx[j])} at step {k + 1}",
                    state=pos[j, k].copy(),
                    path_index=int(idx[j]),
                    step=k + 1,
                )
            pos[:, k + 1] = x
        for j, i in enumerate(idx):
            yield Path(times, pos[j], xi[j], int(config.master_seed), int(i), config)


def simulate_path(config, drift, diffusion, index=0):
    """Path ``index`` of the ensemble defined by ``config``."""
    one = SimConfig(config.dt, config.horizon, 1, config.master_seed, config.start_point, config.truncation_level)
    d = one.dim
    capped = truncate_drift(drift, config.cap) if math.isfinite(config.cap) else drift
    K = one.n_steps
    xi = rng.gaussians(config.master_seed, [index], K, d)[0]
    pos = np.empty((K + 1, d))
    pos[0] = config.start_point
    for k in range(K):
        try:
            pos[k + 1] = euler_step(pos[k], capped, diffusion, config.dt, xi[k])
        except StepOverflowError as err:
            raise StepOverflowError(str(err), err.state, index, k + 1) from None
    return Path(np.arange(K + 1) * config.dt, pos, xi, int(config.master_seed), int(index), config)


# ---------------------------------------------------------------------------
# test functions and residuals


@dataclass(frozen=True)
class TestFunction:
    """A C^2 function with its gradient and Hessian, all vectorized over rows."""

    __test__ = False

    value: Callable
    grad: Callable
    hess: Callable
    name: str = "u"
    support_radius: Optional[float] = None

    @staticmethod
    def constant(c=1.0):
        return TestFunction(
            lambda x: np.full(np.shape(x)[0], float(c)),
            lambda x: np.zeros_like(x),
            lambda x: np.zeros(np.shape(x) + (np.shape(x)[1],)),
            "constant",
        )

    @staticmethod
    def linear(v):
        v = np.asarray(v, dtype=np.float64)
        return TestFunction(
            lambda x: x @ v,
            lambda x: np.broadcast_to(v, np.shape(x)).copy(),
            lambda x: np.zeros(np.shape(x) + (np.shape(x)[1],)),
            "linear",
        )

    @staticmethod
    def square_norm():
        return TestFunction(
            lambda x: np.einsum("ij,ij->i", x, x),
            lambda x: 2.0 * x,
            lambda x: np.broadcast_to(2.0 * np.eye(np.shape(x)[1]), np.shape(x) + (np.shape(x)[1],)).copy(),
            "square_norm",
        )

    @staticmethod
    def bump(center, radius):
        """``exp(-1 / (1 - s))`` with ``s = |x - c|^2 / r^2``, zero for ``s >= 1``."""
        c = np.asarray(center, dtype=np.float64)
        r2 = float(radius) ** 2

        def parts(x):
            z = x - c
            s = np.einsum("ij,ij->i", z, z) / r2
            inside = s < 1.0
            q = np.where(inside, 1.0 / np.where(inside, 1.0 - s, 1.0), 0.0)
            u = np.where(inside, np.exp(-q), 0.0)
            return z, s, q, u, inside

        def value(x):
            return parts(x)[3]

        def grad(x):
            z, s, q, u, _ = parts(x)
            # du/dx = u * (-q^2) * ds/dx, ds/dx = 2 z / r^2
            return (-u * q * q * 2.0 / r2)[:, None] * z

        def hess(x):
            z, s, q, u, _ = parts(x)
            d = x.shape[1]
            g = -u * q * q * 2.0 / r2
            # derivative of g w.r.t. s times ds/dx; dg/ds = u q^2 (q^2 - 2 q) * 2 / r2
            dg = u * q * q * (q * q - 2.0 * q) * 2.0 / r2
            outer = np.einsum("i,ij,ik->ijk", dg * 2.0 / r2, z, z)
            return outer + g[:, None, None] * np.eye(d)[None]

        return TestFunction(value, grad, hess, "bump", support_radius=float(radius))


def _generator(u, x, drift, diffusion, factor=0.5):
    """``factor * tr(a D^2 u) + b . Du`` at the rows of ``x``."""
    a = _matrices(diffusion, x)
    h = u.hess(x)
    lu = factor * np.einsum("kij,kji->k", a, h)
    b = drift.evaluate_many(x)
    return lu + np.einsum("ki,ki->k", b, u.grad(x))


def _path_drift(path, drift):
    cfg = path.config
    if cfg is not None and math.isfinite(cfg.cap):
        return truncate_drift(drift, cfg.cap)
    return drift


def ito_residual(path, u, drift, diffusion):
    """Discrete Ito-formula remainder along one path.

    ``u(x_K) - u(x_0) - sum L u(x_k) dt - sum Du(x_k) . sigma(x_k) sqrt(dt) xi_k``
    using the drift actually simulated and the stored Gaussian draws.
    """
    x = path.positions
    dt = path.dt
    b = _path_drift(path, drift)
    xs = x[:-1]
    try:
        lu = _generator(u, xs, b, diffusion)
        du = u.grad(xs)
        ends = u.value(x[[0, -1]])
    except Exception as err:  # noqa: BLE001
        raise SimulationError(f"test function {u.name} failed: {err}") from err
    noise = _apply_sigma(diffusion, xs, path.gaussians) * math.sqrt(dt)
    return float(ends[1] - ends[0] - np.sum(lu) * dt - np.sum(np.einsum("ki,ki->k", du, noise)))


@dataclass
class MartingaleCheck:
    """Per-interval mean increments of ``u(x_t) - int L u`` with standard errors."""

    intervals: list
    means: np.ndarray
    stderr: np.ndarray
    n_paths: int

    @property
    def z_scores(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.stderr > 0, self.means / self.stderr, np.where(self.means == 0, 0.0, np.inf))
        return z

    def passes(self, z_max=3.0):
        return bool(np.all(np.abs(self.z_scores) <= z_max))


def martingale_residual(ensemble, u, drift, diffusion, checkpoints, generator_factor=0.5):
    """Martingale test of ``u(x_t) - int_0^t L u(x_s) ds`` between checkpoint times.

    ``generator_factor`` multiplies the second-order term; the correct value
    for the Ito generator is 1/2 and any other value is a negative control.
    """
    cps = np.asarray(sorted(set(float(t) for t in checkpoints)), dtype=np.float64)
    if cps.size == 0:
        raise SimulationError("need at least one checkpoint")
    if cps[0] > 0:
        cps = np.concatenate([[0.0], cps])
    incs = []
    for path in ensemble:
        dt = path.dt
        steps = np.rint(cps / dt).astype(np.int64)
        if steps[-1] > path.n_steps:
            raise SimulationError("checkpoint beyond the simulated horizon")
        x = path.positions[: steps[-1] + 1]
        lu = _generator(u, x[:-1], _path_drift(path, drift), diffusion, generator_factor)
        integral = np.concatenate([[0.0], np.cumsum(lu) * dt])
        m = u.value(x[steps]) - integral[steps]
        incs.append(np.diff(m))
    if not incs:
        raise SimulationError("empty ensemble")
    incs = np.asarray(incs)
    n = incs.shape[0]
    means = incs.mean(axis=0)
    se = incs.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(means.shape, np.inf)
    return MartingaleCheck(list(zip(cps[:-1], cps[1:])), means, se, n)


def drift_integral(path, drift):
    """``sum_k |b_M(x_k)| dt`` over the path, with the path's truncation level."""
    b = _path_drift(path, drift).evaluate_many(path.positions[:-1])
    return float(np.sum(np.linalg.norm(b, axis=1)) * path.dt)


# ---------------------------------------------------------------------------
# persistence

_HEADER = struct.Struct("<iqdQ")


def write_path(path, fh):
    """Binary layout: header ``(d:int32, K:int64, dt:float64, seed:uint64)``, then positions (LE float64)."""
    fh.write(_HEADER.pack(path.dim, path.n_steps, path.dt, path.seed))
    fh.write(np.ascontiguousarray(path.positions, dtype="<f8").tobytes())


def read_path(fh):
    """Inverse of :func:`write_path`; Gaussian draws are not stored and come back empty."""
    head = fh.read(_HEADER.size)
    if len(head) != _HEADER.size:
        raise SimulationError("truncated path header")
    d, K, dt, seed = _HEADER.unpack(head)
    if d < 1 or K < 0:
        raise SimulationError("corrupt path header")
    raw = fh.read(8 * (K + 1) * d)
    if len(raw) != 8 * (K + 1) * d:
        raise SimulationError("truncated path file")
    pos = np.frombuffer(raw, dtype="<f8").reshape(K + 1, d).astype(np.float64)
    return Path(np.arange(K + 1) * dt, pos, np.empty((0, d)), int(seed), -1, None)
