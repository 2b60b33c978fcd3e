"""Resolvent functionals, Green densities and domain Green measures.

Densities are histograms of (discounted) occupation weight on uniform cubic
grids.  Statistics over balls use fractional cell-overlap weights: boundary
cells are supersampled and the weights are then normalized so that they
integrate to the exact ball volume, which makes uniform densities reproduce
volume ratios exactly.

Two different exponents are named apart here: ``weight_mu`` for the
exponential localization weight ``exp(sqrt(lam * nu) |x|)`` (with
``nu = weight_mu / 4``) and ``smallset_mu`` for the small-set exponent used
by :mod:`ldrift.verify`.
"""

import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._engine import HistGrid
from .regions import Annulus, Ball, EmptyRegion, Region
from .simulate import SimConfig, simulate_ensemble
from .stopping import PreconditionError, walk_ensemble
from .verify.fitting import FitError, fit_power_law

__all__ = [
    "GreenError",
    "TailTruncationError",
    "HorizonError",
    "UndefinedRatioError",
    "ScalarEstimate",
    "GreenEstimate",
    "AInftyFit",
    "estimate_resolvent",
    "estimate_green_density",
    "estimate_green_densities",
    "estimate_domain_green",
    "lq_norm",
    "reverse_holder_ratio",
    "doubling_ratio",
    "a_infty_exponent_fit",
    "worst_case_family",
    "ball_mass",
    "radial_profile",
    "cell_weights",
    "grid_for",
]

TAIL_TOLERANCE = 1e-6
MAX_CENSORED = 1e-3


class GreenError(ValueError):
    pass


class TailTruncationError(GreenError):
    def __init__(self, message, required_horizon):
        super().__init__(message)
        self.required_horizon = required_horizon


class HorizonError(GreenError):
    pass


class UndefinedRatioError(GreenError, ArithmeticError):
    pass


@dataclass(frozen=True)
class ScalarEstimate:
    value: float
    stderr: float
    n_paths: int

    def z(self, reference):
        return (self.value - reference) / self.stderr if self.stderr > 0 else math.copysign(math.inf, self.value - reference)


@dataclass(eq=False)
class GreenEstimate:
    """Histogram density on ``grid`` with optional refined pole patch.

    ``values`` and ``stderr`` have shape ``(n,) * d`` (units time / volume).
    ``lam`` is ``None`` for domain Green measures.  ``mean_total`` is the
    mean total (discounted) time per path and ``mean_total_se`` its error.
    """

    grid: HistGrid
    values: np.ndarray
    stderr: np.ndarray
    lam: Optional[float]
    n_paths: int
    seed: int
    origin: np.ndarray
    mean_total: float = float("nan")
    mean_total_se: float = float("nan")
    pole_grid: Optional[HistGrid] = None
    pole_values: Optional[np.ndarray] = None
    pole_stderr: Optional[np.ndarray] = None

    @property
    def dim(self):
        return self.values.ndim

    @property
    def h(self):
        return self.grid.h

    @property
    def cell_volume(self):
        return self.grid.h**self.dim

    def centers(self):
        return self.grid.centers()

    def interior_mass(self):
        return float(self.values.sum() * self.cell_volume)

    def pole_index(self):
        if self.pole_grid is None:
            return None
        c = np.asarray(self.pole_grid.lo) + 0.5 * self.pole_grid.n * self.pole_grid.h
        return tuple(int(v) for v in np.floor((c - np.asarray(self.grid.lo)) / self.grid.h))

    # -- serialization -------------------------------------------------
    def to_text(self):
        """Header lines then one row per nonzero cell: ``cell i.. value stderr`` (``pole`` rows for the patch)."""
        out = io.StringIO()
        d = self.dim
        out.write("# ldrift green estimate v1\n")
        out.write(f"# d {d}\n# h {float(self.grid.h)!r}\n# n {self.grid.n}\n")
        out.write("# lo " + " ".join(repr(float(v)) for v in self.grid.lo) + "\n")
        out.write(f"# lambda {'none' if self.lam is None else repr(float(self.lam))}\n")
        out.write(f"# n_paths {self.n_paths}\n# seed {self.seed}\n")
        out.write("# origin " + " ".join(repr(float(v)) for v in self.origin) + "\n")
        out.write(f"# mean_total {float(self.mean_total)!r} {float(self.mean_total_se)!r}\n")
        if self.pole_grid is not None:
            out.write(f"# pole_h {float(self.pole_grid.h)!r}\n# pole_n {self.pole_grid.n}\n")
            out.write("# pole_lo " + " ".join(repr(float(v)) for v in self.pole_grid.lo) + "\n")
        out.write("# columns: section " + " ".join(f"i{k}" for k in range(d)) + " value stderr\n")
        for name, vals, ses in (("cell", self.values, self.stderr), ("pole", self.pole_values, self.pole_stderr)):
            if vals is None:
                continue
            for idx in zip(*np.nonzero(vals)):
                out.write(name + " " + " ".join(str(int(i)) for i in idx) + f" {float(vals[idx])!r} {float(ses[idx])!r}\n")
        return out.getvalue()

    @classmethod
    def from_text(cls, text):
        head, rows = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) >= 2 and parts[0] != "columns:" and parts[0] != "ldrift":
                    head[parts[0]] = parts[1:]
            elif line.strip():
                rows.append(line.split())
        try:
            d = int(head["d"][0])
            grid = HistGrid(tuple(float(v) for v in head["lo"]), float(head["h"][0]), int(head["n"][0]))
            lam = None if head["lambda"][0] == "none" else float(head["lambda"][0])
            pole = None
            if "pole_h" in head:
                pole = HistGrid(tuple(float(v) for v in head["pole_lo"]), float(head["pole_h"][0]), int(head["pole_n"][0]))
        except (KeyError, IndexError, ValueError) as err:
            raise GreenError(f"malformed green estimate header: {err}") from err
        vals = np.zeros((grid.n,) * d)
        ses = np.zeros_like(vals)
        pv = np.zeros((pole.n,) * d) if pole else None
        ps = np.zeros_like(pv) if pole else None
        for r in rows:
            try:
                idx = tuple(int(v) for v in r[1 : 1 + d])
                v, s = float(r[1 + d]), float(r[2 + d])
            except (IndexError, ValueError) as err:
                raise GreenError(f"malformed green estimate row {' '.join(r)!r}") from err
            if r[0] == "cell":
                vals[idx], ses[idx] = v, s
            elif r[0] == "pole" and pole is not None:
                pv[idx], ps[idx] = v, s
            else:
                raise GreenError(f"unknown row section {r[0]!r}")
        mt = head.get("mean_total", ["nan", "nan"])
        return cls(
            grid, vals, ses, lam, int(head["n_paths"][0]), int(head["seed"][0]),
            np.array([float(v) for v in head["origin"]]), float(mt[0]), float(mt[1]), pole, pv, ps,
        )  # fmt: skip


def grid_for(center, half_width, h):
    """Grid of cell edge ``h`` covering the cube ``center +- half_width`` with ``center`` at a cell center."""
    c = np.asarray(center, float)
    k = int(math.ceil(half_width / h - 0.5))
    n = 2 * k + 1
    return HistGrid(tuple(c - (k + 0.5) * h), float(h), n)


def _pole_grid(grid, x0, levels):
    if levels <= 0:
        return None
    idx = np.floor((np.asarray(x0, float) - np.asarray(grid.lo)) / grid.h)
    if np.any(idx < 0) or np.any(idx >= grid.n):
        return None
    lo = np.asarray(grid.lo) + idx * grid.h
    m = 2**levels
    return HistGrid(tuple(lo), grid.h / m, m)


def _check_horizon(config, lam):
    need = math.log(1.0 / TAIL_TOLERANCE) / lam
    if config.horizon < need * (1 - 1e-12):
        raise TailTruncationError(f"horizon {config.horizon} too short for lambda {lam}: need T >= {need:.4g}", need)


def _density(sum_, sq, n, vol):
    mean = sum_ / n
    var = np.maximum(sq / n - mean**2, 0.0) * n / max(n - 1, 1)
    return mean / vol, np.sqrt(var / n) / vol


def _mean_se(x):
    x = np.asarray(x, float)
    n = x.size
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf


def estimate_resolvent(config, drift, diffusion, f, lam, method="kill", workers=None):
    """Monte-Carlo estimate of ``E int_0^inf exp(-lam t) f(x_t) dt``.

    ``f`` may be a number (constant function), a :class:`Ball`, an
    :class:`Annulus`, an empty region, or a vectorized callable on ``(n, d)``
    arrays (the callable route materializes paths and uses deterministic
    weights).  ``method`` is ``"kill"`` or ``"weight"`` for the walker.
    """
    if not lam > 0:
        raise GreenError("lambda must be positive")
    _check_horizon(config, lam)
    if isinstance(f, EmptyRegion):
        return ScalarEstimate(0.0, 0.0, config.n_paths)
    if isinstance(f, (int, float)):
        if f == 0:
            return ScalarEstimate(0.0, 0.0, config.n_paths)
        res = walk_ensemble(config, drift, diffusion, discount=method, lam=lam, workers=workers).require_clean()
        m, s = _mean_se(float(f) * res.discounted_time)
        return ScalarEstimate(m, s, config.n_paths)
    if isinstance(f, (Ball, Annulus)):
        sets = [f] if isinstance(f, Ball) else [Ball(f.center, f.outer)] + ([Ball(f.center, f.inner)] if f.inner > 0 else [])
        res = walk_ensemble(config, drift, diffusion, discount=method, lam=lam, occupation_sets=sets, workers=workers)
        res.require_clean()
        occ = res.occupation[:, 0] - (res.occupation[:, 1] if len(sets) > 1 else 0.0)
        m, s = _mean_se(occ)
        return ScalarEstimate(m, s, config.n_paths)
    if callable(f):
        vals = []
        w = math.exp(-lam * config.dt)
        for path in simulate_ensemble(config, drift, diffusion):
            fx = np.asarray(f(path.positions[:-1]), float)
            weights = w ** np.arange(fx.size) * (1.0 - w) / lam
            vals.append(float(np.dot(weights, fx)))
        m, s = _mean_se(vals)
        return ScalarEstimate(m, s, config.n_paths)
    raise GreenError(f"unsupported function specification {type(f).__name__}")


def _green_from_run(res, grid, pole, lam, config, first=0):
    n = res.n_paths
    s, q = res.histogram(first)
    vals, ses = _density(s, q, n, grid.h ** len(grid.lo))
    pv = ps = None
    if pole is not None:
        s2, q2 = res.histogram(first + 1)
        pv, ps = _density(s2, q2, n, pole.h ** len(grid.lo))
    mt, mts = _mean_se(res.discounted_time)
    return GreenEstimate(
        grid, vals, ses, lam, n, int(config.master_seed), np.asarray(config.start_point, float), mt, mts, pole, pv, ps
    )


def estimate_green_densities(config, drift, diffusion, grids, lam, method="kill", pole_levels=2, workers=None):
    """Histogram estimates of ``G_lam`` on several grids from one ensemble (same paths for all grids)."""
    if config.n_paths < 1:
        raise GreenError("empty ensemble")
    if not lam > 0:
        raise GreenError("lambda must be positive")
    _check_horizon(config, lam)
    poles = [_pole_grid(g, config.start_point, pole_levels) for g in grids]
    flat = []
    for g, p in zip(grids, poles):
        flat += [g] + ([p] if p else [])
    res = walk_ensemble(config, drift, diffusion, discount=method, lam=lam, grids=flat, workers=workers).require_clean()
    out, i = [], 0
    for g, p in zip(grids, poles):
        out.append(_green_from_run(res, g, p, lam, config, i))
        i += 2 if p else 1
    return out


def estimate_green_density(config, drift, diffusion, grid, lam, method="kill", pole_levels=2, workers=None):
    """Histogram estimate of the resolvent density ``G_lam`` on ``grid``.

    The cell containing the start point is additionally resolved on a patch
    refined by ``pole_levels`` halvings.
    """
    return estimate_green_densities(config, drift, diffusion, [grid], lam, method, pole_levels, workers)[0]


def estimate_domain_green(config, drift, diffusion, domain, gamma, pole_levels=2, workers=None, bridge=False):
    """Expected time in ``gamma`` before the first exit from ``domain``.

    ``gamma`` is a :class:`Ball` (scalar estimate), an empty region (0), the
    domain itself (mean exit time) or a :class:`HistGrid` (density estimate
    of the domain Green measure).
    """
    if config.n_paths < 1:
        raise GreenError("empty ensemble")
    if isinstance(gamma, EmptyRegion):
        return ScalarEstimate(0.0, 0.0, config.n_paths)
    kw = dict(domain=domain, bridge=bridge, workers=workers)
    if isinstance(gamma, HistGrid):
        pole = _pole_grid(gamma, config.start_point, pole_levels)
        res = walk_ensemble(config, drift, diffusion, grids=[gamma] + ([pole] if pole else []), **kw)
        _check_censoring(res)
        return _green_from_run(res, gamma, pole, None, config)
    if gamma is domain:
        res = walk_ensemble(config, drift, diffusion, **kw)
        _check_censoring(res)
        m, s = _mean_se(res.stop_times)
        return ScalarEstimate(m, s, config.n_paths)
    if isinstance(gamma, Ball):
        res = walk_ensemble(config, drift, diffusion, occupation_sets=[gamma], **kw)
        _check_censoring(res)
        m, s = _mean_se(res.occupation[:, 0])
        return ScalarEstimate(m, s, config.n_paths)
    raise GreenError(f"unsupported set specification {type(gamma).__name__}")


def _check_censoring(res):
    res.require_clean()
    if res.censored_fraction > MAX_CENSORED:
        raise HorizonError(f"censored fraction {res.censored_fraction:.2e} exceeds {MAX_CENSORED:.0e}")


# ---------------------------------------------------------------------------
# cell weights and ball statistics

_SS = 8


def cell_weights(grid, region, normalize=True):
    """Fraction of each grid cell inside ``region`` (``None`` means all cells).

    Balls and annuli are handled exactly away from their boundary and by
    ``8^d`` supersampling on boundary cells; with ``normalize`` the boundary
    fractions are rescaled so the weights integrate to the exact volume.
    """
    d = len(grid.lo)
    shape = (grid.n,) * d
    if region is None:
        return np.ones(shape)
    if isinstance(region, Annulus):
        outer = cell_weights(grid, Ball(region.center, region.outer), normalize)
        if region.inner == 0:
            return outer
        return np.clip(outer - cell_weights(grid, Ball(region.center, region.inner), normalize), 0.0, 1.0)
    h = grid.h
    if isinstance(region, Ball):
        return _ball_weights(grid, region, normalize)
    centers = grid.centers()
    w = region.contains(centers).astype(float)
    _refine_edges(w, np.arange(len(centers)), centers, region, h, d)
    return w.reshape(shape)


def _refine_edges(w, edge, centers, region, h, d):
    off = (np.arange(_SS) + 0.5) / _SS - 0.5
    sub = np.stack(np.meshgrid(*([off] * d), indexing="ij"), axis=-1).reshape(-1, d) * h
    for s in range(0, edge.size, 4096):
        e = edge[s : s + 4096]
        w[e] = region.contains(centers[e, None, :] + sub[None]).mean(axis=1)


def _ball_weights(grid, ball, normalize):
    # only the cells of the bounding box can carry weight
    d = len(grid.lo)
    h = grid.h
    lo_b, hi_b = ball.bounds()
    lo_g = np.asarray(grid.lo, float)
    if np.any(lo_b < lo_g - 1e-12) or np.any(hi_b > lo_g + grid.n * h + 1e-12):
        raise PreconditionError("ball not covered by the grid")
    i0 = np.clip(np.floor((lo_b - lo_g) / h).astype(int) - 1, 0, grid.n)
    i1 = np.clip(np.ceil((hi_b - lo_g) / h).astype(int) + 1, 0, grid.n)
    axes = [lo_g[k] + (np.arange(i0[k], i1[k]) + 0.5) * h for k in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=1)
    r = np.linalg.norm(centers - np.asarray(ball.center, float), axis=1)
    half = 0.5 * h * math.sqrt(d)
    w = (r <= ball.radius - half).astype(float)
    edge = np.flatnonzero(np.abs(r - ball.radius) < half)
    if edge.size:
        # separable squared distances of the sub-sample points, per axis
        off = ((np.arange(_SS) + 0.5) / _SS - 0.5) * h
        c = np.asarray(ball.center, float)
        r2 = ball.radius**2
        for s in range(0, edge.size, 4096):
            e = edge[s : s + 4096]
            acc = np.zeros((e.size,) + (1,) * d)
            for k in range(d):
                a = (centers[e, k, None] + off[None] - c[k]) ** 2
                shape = [e.size] + [1] * d
                shape[k + 1] = _SS
                acc = acc + a.reshape(shape)
            w[e] = (acc.reshape(e.size, -1) <= r2).mean(axis=1)
        if normalize:
            exact = ball.volume() / h**d
            interior = w.sum() - w[edge].sum()
            partial = w[edge].sum()
            if partial > 0:
                w[edge] *= (exact - interior) / partial
    out = np.zeros((grid.n,) * d)
    out[tuple(slice(a, b) for a, b in zip(i0, i1))] = w.reshape(tuple(i1 - i0))
    return out


def _with_pole(est, w, vals_fn):
    """Sum of ``w * vals_fn(values) * volume`` with the pole cell replaced by its refined patch."""
    total = float(np.sum(w * vals_fn(est.values))) * est.cell_volume
    pi = est.pole_index()
    if pi is not None and w[pi] > 0:
        sub_vol = est.pole_grid.h**est.dim
        total += w[pi] * (float(np.sum(vals_fn(est.pole_values))) * sub_vol - float(vals_fn(est.values[pi])) * est.cell_volume)
    return total


def ball_mass(est, region=None):
    """Estimated measure of ``region``: ``sum_cells weight * value * volume``."""
    return _with_pole(est, cell_weights(est.grid, region), lambda v: v)


def lq_norm(est, q, region=None, weight_mu=None, lam=None):
    """``(sum_cells w (Psi G)^q vol)^(1/q)`` over ``region``.

    With ``weight_mu`` the density is multiplied by
    ``Psi(x) = exp(sqrt(lam * weight_mu / 4) |x - origin|)`` at cell centers.
    """
    if q < 1:
        raise GreenError("q must be at least 1")
    w = cell_weights(est.grid, region)
    if weight_mu is not None:
        lam = est.lam if lam is None else lam
        nu = weight_mu / 4.0
        r = np.linalg.norm(est.centers() - est.origin, axis=1).reshape(w.shape)
        w = w * np.exp(q * math.sqrt(lam * nu) * r)
    return _with_pole(est, w, lambda v: np.asarray(v) ** q) ** (1.0 / q)


def reverse_holder_ratio(est, ball, p):
    """``(avg_B G^(p/(p-1)))^((p-1)/p) / avg_2B G`` for a ball of radius at most 1/2."""
    if ball.radius > 0.5 + 1e-12:
        raise PreconditionError("reverse Hoelder balls must have radius <= 1/2")
    if not p > 1:
        raise GreenError("p must exceed 1")
    q = p / (p - 1.0)
    big = Ball(ball.center, 2.0 * ball.radius)
    den = _with_pole(est, cell_weights(est.grid, big), lambda v: v) / big.volume()
    if not den > 0:
        raise UndefinedRatioError("zero mass on the doubled ball")
    num = (_with_pole(est, cell_weights(est.grid, ball), lambda v: np.asarray(v) ** q) / ball.volume()) ** (1.0 / q)
    return num / den


def doubling_ratio(est, ball):
    """``G(B) / G(B / 2)``."""
    half = Ball(ball.center, 0.5 * ball.radius)
    den = ball_mass(est, half)
    if not den > 0:
        raise UndefinedRatioError("zero mass on the half ball")
    return ball_mass(est, ball) / den


def worst_case_family(est, ball, gammas):
    """Cell-weight arrays of sets inside ``ball`` holding the lowest-density cells, of measure fractions ``gammas``."""
    w = cell_weights(est.grid, ball)
    flat_w = w.ravel()
    inside = np.flatnonzero(flat_w > 0)
    order = inside[np.argsort(est.values.ravel()[inside], kind="stable")]
    cum = np.cumsum(flat_w[order])
    total = cum[-1]
    fam = []
    for g in gammas:
        target = g * total
        k = int(np.searchsorted(cum, target))
        m = np.zeros_like(flat_w)
        m[order[:k]] = flat_w[order[:k]]
        if k < order.size:
            m[order[k]] = target - (cum[k - 1] if k > 0 else 0.0)
        fam.append(m.reshape(w.shape))
    return fam


@dataclass(frozen=True)
class AInftyFit:
    """Fit of ``log(G(Gamma) / G(B))`` against ``log(|Gamma| / |B|)``."""

    smallset_mu: float
    slope_ci: tuple
    constant: float
    minimal_constant: float
    holds: bool
    gammas: np.ndarray
    ratios: np.ndarray


def a_infty_exponent_fit(est, ball, family, gammas=None):
    """Fit ``G(Gamma_i) / G(B) ~ gamma_i^mu`` over a family of subsets of ``ball``.

    ``family`` items are regions or cell-weight arrays; ``gammas`` defaults
    to the measured volume fractions.  ``constant`` is ``N`` from the fitted
    intercept and ``minimal_constant`` the smallest ``N`` with
    ``N G(Gamma) / G(B) >= gamma^mu`` on every sample; ``holds`` reports
    whether the fitted constant is within a factor 2 of that minimum.
    """
    wb = cell_weights(est.grid, ball)
    gb = _with_pole(est, wb, lambda v: v)
    if not gb > 0:
        raise UndefinedRatioError("zero mass on the ball")
    vol_b = float(wb.sum())
    g_list, r_list = [], []
    for i, s in enumerate(family):
        w = s if isinstance(s, np.ndarray) else cell_weights(est.grid, s)
        g_list.append(float(w.sum()) / vol_b if gammas is None else float(gammas[i]))
        r_list.append(_with_pole(est, w, lambda v: v) / gb)
    g = np.asarray(g_list)
    r = np.asarray(r_list)
    if np.unique(np.round(g, 12)).size < 2:
        raise FitError("degenerate subset family: need at least two distinct measure fractions")
    if np.any(r <= 0):
        raise UndefinedRatioError("subset with zero estimated measure")
    fit = fit_power_law(g, r)
    mu = fit.slope
    n_fit = math.exp(-fit.intercept)
    n_min = float(np.max(g**mu / r))
    return AInftyFit(mu, fit.slope_ci, n_fit, n_min, bool(n_min <= 2.0 * n_fit), g, r)


def radial_profile(est, edges, kernel=None, center=None, supersample=4):
    """Shell masses of the estimate, optionally with the kernel integrated over the same cells.

    Returns ``(mids, mass, mass_se, kernel_mass)`` for cells whose centers fall
    in each shell ``[edges[i], edges[i+1])``; the kernel mass uses
    ``supersample^d`` points per cell.
    """
    c = est.origin if center is None else np.asarray(center, float)
    cen = est.centers()
    r = np.linalg.norm(cen - c, axis=1)
    vals = est.values.ravel()
    ses = est.stderr.ravel()
    vol = est.cell_volume
    d = est.dim
    mids, mass, mse, kmass = [], [], [], []
    if kernel is not None:
        off = (np.arange(supersample) + 0.5) / supersample - 0.5
        sub = np.stack(np.meshgrid(*([off] * d), indexing="ij"), axis=-1).reshape(-1, d) * est.h
    for a, b in zip(edges[:-1], edges[1:]):
        sel = np.flatnonzero((r >= a) & (r < b))
        mids.append(0.5 * (a + b))
        mass.append(float(vals[sel].sum() * vol))
        # cells are positively correlated through shared paths; the sum of variances is a lower bound
        mse.append(float(np.sqrt(np.sum(ses[sel] ** 2)) * vol))
        if kernel is not None:
            pts = cen[sel, None, :] + sub[None]
            rr = np.linalg.norm(pts - c, axis=-1)
            kmass.append(float(kernel(rr).mean(axis=1).sum() * vol))
    return np.asarray(mids), np.asarray(mass), np.asarray(mse), (np.asarray(kmass) if kernel is not None else None)
