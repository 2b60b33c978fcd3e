"""Registry of experiments, each turning one inequality into a statistical check.

Every kind has three parts:

* ``defaults``: protocol parameters, overridable through the ``analysis``
  block of a configuration (unknown keys are rejected);
* a measurement function that runs ensembles and returns plain estimates;
* a judge: a pure function of those estimates and the tolerances in
  ``thresholds.json`` that returns the list of checks.

Checks tagged ``oracle`` compare against driftless Brownian closed forms and
only apply when the drift is zero and the diffusion is the identity; for
other fields they are recorded as not applicable and the verdict becomes
``inconclusive`` (unless an ``always`` check fails).  Each kind also has a
negative-control override (a wrong generator factor or a wrong exponent)
that must produce ``fail``.
"""

import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid

from .. import green as _green
from .. import inkspots as _ink
from .. import simulate as _sim
from .. import stopping as _stop
from ..fields import sphere_area
from ..regions import Ball, Cylinder, Halfspace
from . import oracles as _or
from .fitting import FitError, fit_line, fit_power_law

__all__ = [
    "RegistryError",
    "Check",
    "Quantity",
    "ExperimentReport",
    "Experiment",
    "REGISTRY",
    "CSV_COLUMNS",
    "load_thresholds",
    "run_experiment",
    "default_config",
    "verdict_of",
]

CSV_COLUMNS = ("kind", "anchor", "quantity", "parameters", "abscissa", "estimate", "stderr", "verdict")


class RegistryError(KeyError):
    pass


def load_thresholds():
    """The versioned tolerance registry shipped with the package."""
    text = resources.files("ldrift.verify").joinpath("thresholds.json").read_text()
    return json.loads(text)


# ---------------------------------------------------------------------------
# report types


@dataclass(frozen=True)
class Check:
    """``passed`` is ``None`` when an oracle check does not apply to the configured fields."""

    name: str
    passed: Optional[bool]
    category: str
    detail: str = ""


@dataclass(frozen=True)
class Quantity:
    name: str
    params: dict
    estimate: float
    stderr: float = math.nan
    abscissa: float = math.nan


@dataclass
class ExperimentReport:
    kind: str
    anchor: str
    parameters: dict
    quantities: list
    fits: dict
    checks: list
    verdict: str
    runtime: float
    seeds: list
    negative_control: bool = False
    thresholds_version: int = 0
    green: dict = field(default_factory=dict)

    def record(self):
        """JSON-ready dictionary (runtime excluded so reruns are byte-identical)."""
        return {
            "kind": self.kind,
            "anchor": self.anchor,
            "verdict": self.verdict,
            "negative_control": self.negative_control,
            "thresholds_version": self.thresholds_version,
            "parameters": _jsonable(self.parameters),
            "seeds": [int(s) for s in self.seeds],
            "checks": [{"name": c.name, "passed": c.passed, "category": c.category, "detail": c.detail} for c in self.checks],
            "fits": _jsonable(self.fits),
            "quantities": [
                {"name": q.name, "params": _jsonable(q.params), "abscissa": _num(q.abscissa), "estimate": _num(q.estimate), "stderr": _num(q.stderr)}
                for q in self.quantities
            ],
        }

    def csv_rows(self):
        out = []
        for q in self.quantities:
            params = ";".join(f"{k}={_fmt(v)}" for k, v in sorted(q.params.items()))
            out.append((self.kind, self.anchor, q.name, params, _fmt(q.abscissa), _fmt(q.estimate), _fmt(q.stderr), self.verdict))
        return out

    def estimate(self, name, **params):
        """First quantity with this name whose parameters include ``params``."""
        for q in self.quantities:
            if q.name == name and all(_param_match(q.params.get(k), v) for k, v in params.items()):
                return q
        raise KeyError(name)


def _param_match(have, want):
    if isinstance(want, (int, float)) and not isinstance(want, bool):
        return isinstance(have, (int, float)) and not isinstance(have, bool) and bool(np.isclose(have, want))
    return have == want


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + " ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _num(v)
    return v


def verdict_of(checks):
    """``fail`` if an applicable check fails, ``inconclusive`` if an oracle check did not apply, else ``pass``."""
    if any(c.passed is False for c in checks):
        return "fail"
    if any(c.passed is None for c in checks):
        return "inconclusive"
    return "pass"


def _oracle(name, bm, ok, detail=""):
    if not bm:
        return Check(name, None, "oracle", "not applicable: fields differ from Brownian motion")
    return Check(name, bool(ok), "oracle", detail)


def _always(name, ok, detail=""):
    return Check(name, bool(ok), "always", detail)


def _finite_pos(x):
    x = np.asarray(x, float)
    return bool(x.size and np.all(np.isfinite(x)) and np.all(x > 0))


def _fit_dict(f):
    return {"slope": f.slope, "slope_ci": list(f.slope_ci), "intercept": f.intercept, "r_squared": f.r_squared}


def _safe_power_fit(x, y, se=None):
    try:
        if se is not None and not np.all(np.asarray(se) > 0):
            se = None
        return fit_power_law(x, y, se)
    except FitError:
        return None


def _mean_se(x):
    x = np.asarray(x, float)
    if x.size < 2:
        return float(x.mean()), math.inf
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _ratio_se(num, den):
    """Ratio of means with the delta-method standard error."""
    n = len(num)
    mn, md = float(np.mean(num)), float(np.mean(den))
    r = mn / md
    resid = (np.asarray(num) - r * np.asarray(den)) / md
    return r, float(resid.std(ddof=1) / math.sqrt(n))


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


class _Context:
    """Resolved parameters, fields and seed stream for one run."""

    def __init__(self, cfg, spec):
        self.cfg = cfg
        a = dict(spec.defaults)
        a.update(cfg.analysis)
        if cfg.negative_control:
            a.update(spec.negative)
        self.a = a
        self.d = cfg.dim
        self.drift, self.diffusion = cfg.build_fields()
        self.bm = cfg.drift.kind == "zero" and cfg.diffusion.kind == "identity"
        self.seeds = []
        self.x0 = np.asarray(cfg.sim.start_point, float)

    def sim(self, **kw):
        """A SimConfig with the next derived seed; ``kw`` overrides config fields."""
        seed = _splitmix64(int(self.cfg.seed) * 1_000_003 + len(self.seeds))
        self.seeds.append(seed)
        return self.cfg.sim_config(master_seed=seed, **kw)

    def walk(self, sim, **kw):
        return _stop.walk_ensemble(sim, self.drift, self.diffusion, **kw).require_clean()

    def e1(self, s):
        v = np.zeros(self.d)
        v[0] = s
        return v

    def require_dim(self, *dims):
        if self.d not in dims:
            raise _stop.PreconditionError(f"{self.cfg.kind} needs dimension in {dims}, got {self.d}")


@dataclass(frozen=True)
class Experiment:
    kind: str
    anchor: str
    defaults: dict
    negative: dict
    measure: Callable
    judge: Callable
    start_dim: int = 2
    sim: dict = field(default_factory=dict)


@dataclass
class _Measured:
    est: dict
    quantities: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    green: dict = field(default_factory=dict)


def _p(a, d):
    return float(d if a.get("p") is None else a["p"])


# ---------------------------------------------------------------------------
# resolvent and Green densities


def _m_resolvent_scaling(ctx):
    a, d = ctx.a, ctx.d
    qs, vals, ses = [], [], []
    for lam in a["lams"]:
        lam = float(lam)
        r = lam ** (-float(a["radius_exponent"]))
        T = math.log(1.0 / _green.TAIL_TOLERANCE) / lam * (1 + 1e-9)
        sim = ctx.sim(dt=float(a["dt_scale"]) / lam, horizon=T)
        est = _green.estimate_resolvent(sim, ctx.drift, ctx.diffusion, Ball(tuple(ctx.x0), r), lam)
        vals.append(lam * est.value)
        ses.append(lam * est.stderr)
        qs.append(Quantity("lambda_times_resolvent", {"lam": lam, "radius": r}, lam * est.value, lam * est.stderr, lam))
    ref = None
    if d == 3:
        lam = 1.0
        ref = lam * _or.bm_resolvent_ball(lam, lam**-0.5)
    return _Measured({"values": vals, "stderr": ses, "dim": d, "bm_value": ref}, qs)


def _j_resolvent_scaling(e, tol, bm):
    lo, hi = tol["interval"]
    out = [_always("finite_positive", _finite_pos(e["values"]))]
    inside = all(lo <= v <= hi for v in e["values"])
    if e["dim"] != 3:
        out.append(Check("calibrated_interval", None, "oracle", "interval calibrated for d = 3"))
    else:
        out.append(_oracle("calibrated_interval", bm, inside, f"values {np.round(e['values'], 4).tolist()} vs [{lo}, {hi}]"))
    return out


def _m_green_norm(ctx):
    a, d = ctx.a, ctx.d
    ps = [float(p) for p in a["ps"]]
    norms = {p: [] for p in ps}
    qs = []
    lams = [float(x) for x in a["lams"]]
    saved = {}
    for lam in lams:
        s = lam**-0.5
        T = math.log(1.0 / _green.TAIL_TOLERANCE) / lam * (1 + 1e-9)
        sim = ctx.sim(dt=float(a["dt_scale"]) / lam, horizon=T)
        grid = _green.grid_for(ctx.x0, float(a["half_width"]) * s, float(a["cell"]) * s)
        est = _green.estimate_green_density(sim, ctx.drift, ctx.diffusion, grid, lam)
        saved[f"lam{lam:g}"] = est
        for p in ps:
            q = p / (p - 1.0)
            v = _green.lq_norm(est, q, None, float(a["weight_mu"]), lam)
            norms[p].append(v)
            qs.append(Quantity("weighted_lq_norm", {"lam": lam, "p": p}, v, math.nan, lam))
        qs.append(Quantity("total_mass_times_lambda", {"lam": lam}, lam * est.mean_total, lam * est.mean_total_se, lam))
    fits, slopes = {}, {}
    for p in ps:
        f = _safe_power_fit(lams, norms[p])
        if f is not None:
            fits[f"norm_vs_lambda_p{p:g}"] = _fit_dict(f)
            slopes[p] = f.slope
    ref = {p: d / (2 * p) - 1 if not a["wrong_exponent"] else d / p - 1 for p in ps}
    e = {"norms": {str(p): norms[p] for p in ps}, "slopes": {str(p): slopes.get(p) for p in ps}, "reference": {str(p): ref[p] for p in ps}}
    return _Measured(e, qs, fits, saved)


def _j_green_norm(e, tol, bm):
    vals = [v for vs in e["norms"].values() for v in vs]
    out = [_always("finite_positive", _finite_pos(vals))]
    for p, s in e["slopes"].items():
        ok = s is not None and abs(s - e["reference"][p]) <= tol["slope_tol"]
        out.append(_oracle(f"lambda_slope_p{float(p):g}", bm, ok, f"slope {s} vs {e['reference'][p]:.4f}"))
    return out


def _reverse_holder_balls(a, d):
    rng = np.random.default_rng(int(a["ball_seed"]))
    balls = []
    while len(balls) < int(a["n_balls"]):
        r = rng.uniform(float(a["min_radius"]), float(a["max_radius"]))
        if not balls:
            c = np.zeros(d)
        else:
            v = rng.normal(size=d)
            c = v / np.linalg.norm(v) * float(a["placement_radius"]) * rng.uniform() ** (1.0 / d)
        balls.append(Ball(tuple(c), r))
    return balls


def _m_reverse_holder(ctx):
    a, d = ctx.a, ctx.d
    lam = float(a["lam"])
    T = math.log(1.0 / _green.TAIL_TOLERANCE) / lam * (1 + 1e-9)
    sim = ctx.sim(horizon=T)
    hw = float(a["half_width"])
    h = float(a["cell"])
    grids = [_green.grid_for(ctx.x0, hw, h), _green.grid_for(ctx.x0, hw, h / 2)]
    coarse, fine = _green.estimate_green_densities(sim, ctx.drift, ctx.diffusion, grids, lam)
    p = float(a["p"])
    balls = _reverse_holder_balls(a, d)
    rc, rf, floor = [], [], []
    qs = []
    for i, b in enumerate(balls):
        x, y = _green.reverse_holder_ratio(coarse, b, p), _green.reverse_holder_ratio(fine, b, p)
        big = Ball(b.center, 2 * b.radius)
        jensen = (_green.ball_mass(fine, b) / b.volume()) / (_green.ball_mass(fine, big) / big.volume())
        rc.append(x)
        rf.append(y)
        floor.append(jensen)
        qs.append(Quantity("reverse_holder_ratio", {"ball": i, "radius": b.radius, "grid": "fine"}, y, math.nan, b.radius))
    mc, mf = float(np.mean(rc)), float(np.mean(rf))
    qs.append(Quantity("mean_ratio", {"grid": "coarse", "p": p}, mc))
    qs.append(Quantity("mean_ratio", {"grid": "fine", "p": p}, mf))
    qs.append(Quantity("fraction_ratio_above_one", {"grid": "fine"}, float(np.mean(np.asarray(rf) >= 1))))
    e = {"coarse": rc, "fine": rf, "jensen_floor": floor, "mean_coarse": mc, "mean_fine": mf}
    return _Measured(e, qs, {}, {"coarse": coarse, "fine": fine})


def _j_reverse_holder(e, tol, bm):
    fine = np.asarray(e["fine"])
    change = abs(e["mean_fine"] - e["mean_coarse"]) / e["mean_fine"]
    floor_ok = bool(np.all(fine >= np.asarray(e["jensen_floor"]) * (1 - 1e-9)))
    return [
        _always("finite_positive", _finite_pos(fine)),
        _always("jensen_floor", floor_ok, "ratio is at least the plain average ratio"),
        _oracle("bounded", bm, float(fine.max()) <= tol["ratio_max"], f"max ratio {fine.max():.4f}"),
        _oracle("refinement_stable", bm, change < tol["refine_tol"], f"relative change {change:.4f}"),
    ]


# ---------------------------------------------------------------------------
# exit times and occupation


def _m_exit_floor(ctx):
    a = ctx.a
    radii = [float(r) for r in a["radii"]]
    Q, S, ratio = [], [], []
    qs = []
    e_pow = float(a["exponent"])
    for R in radii:
        sim = ctx.sim(dt=float(a["dt_rel"]) * R * R, horizon=R * R)
        res = ctx.walk(sim, domain=Ball(tuple(ctx.x0), R), bridge=bool(a["bridge"]))
        t = np.minimum(res.stop_times, R * R)
        m, s = _mean_se(1.0 - np.exp(-t))
        Q.append(m)
        S.append(s)
        ratio.append(min(R**e_pow, 1.0) / m)
        qs.append(Quantity("discounted_exit_time", {"R": R}, m, s, R))
        qs.append(Quantity("floor_ratio", {"R": R, "exponent": e_pow}, ratio[-1], ratio[-1] * s / m, R))
    return _Measured({"Q": Q, "ratio": ratio})


def _j_exit_floor(e, tol, bm):
    r = np.asarray(e["ratio"])
    return [
        _always("finite_positive", _finite_pos(e["Q"])),
        _oracle("ratio_bounded", bm, float(r.max()) <= tol["n_max"], f"max ratio {r.max():.4f}"),
    ]


def _ball_lp_weighted(d, rho, p, a_rate):
    """``(int_{B_rho} exp(-p a |x|) dx)^(1/p)``."""
    from scipy import integrate

    v, _ = integrate.quad(lambda r: sphere_area(d) * r ** (d - 1) * math.exp(-p * a_rate * r), 0, rho, epsrel=1e-12)
    return v ** (1.0 / p)


def _m_moment_factorial(ctx):
    a, d = ctx.a, ctx.d
    p = _p(a, d)
    nu = float(a["weight_mu"]) / 4.0
    n_max = int(a["max_order"])
    Ts = [float(t) for t in a["horizons"]]
    scaled = {n: [] for n in range(1, n_max + 1)}
    nhat = {n: [] for n in range(1, n_max + 1)}
    qs = []
    for T in Ts:
        rho = float(a["rho"]) * math.sqrt(T)
        sim = ctx.sim(dt=float(a["dt_rel"]) * T, horizon=T)
        res = ctx.walk(sim, occupation_sets=[Ball(tuple(ctx.x0), rho)])
        occ = res.occupation[:, 0]
        for n in range(1, n_max + 1):
            m, s = _mean_se(occ**n)
            root = (m / math.factorial(n)) ** (1.0 / n)
            norm = _ball_lp_weighted(d, rho, p, math.sqrt(nu / T) / n)
            bound = T ** (1 - d / (2 * p)) * norm
            scaled[n].append(root / norm)
            nhat[n].append(root / bound)
            qs.append(Quantity("moment", {"T": T, "n": n}, m, s, T))
            qs.append(Quantity("normalized_root", {"T": T, "n": n}, root / bound, math.nan, T))
    fits, slopes = {}, {}
    for n in range(1, n_max + 1):
        f = _safe_power_fit(Ts, scaled[n])
        if f is not None:
            fits[f"root_moment_vs_T_n{n}"] = _fit_dict(f)
            slopes[str(n)] = f.slope
    ref = 1 - d / (2 * p) if not a["wrong_exponent"] else 1.0
    growth = max(max(nhat[n][i] for n in nhat) / nhat[1][i] for i in range(len(Ts)))
    e = {"nhat": {str(n): v for n, v in nhat.items()}, "slopes": slopes, "reference": ref, "growth": growth}
    return _Measured(e, qs, fits)


def _j_moment_factorial(e, tol, bm):
    vals = [v for vs in e["nhat"].values() for v in vs]
    out = [_always("finite_positive", _finite_pos(vals))]
    out.append(_always("factorial_growth", e["growth"] <= tol["growth_max"], f"max N_n / N_1 = {e['growth']:.4f}"))
    for n, s in e["slopes"].items():
        out.append(_oracle(f"horizon_slope_n{n}", bm, abs(s - e["reference"]) <= tol["slope_tol"], f"slope {s:.4f} vs {e['reference']:.4f}"))
    return out


def _m_exit_occupation(ctx):
    a, d = ctx.a, ctx.d
    p = _p(a, d)
    radii = [float(r) for r in a["radii"]]
    frac = float(a["inner_fraction"])
    vals, ses, norm_ratio, oracle = [], [], [], []
    qs = []
    for R in radii:
        sim = ctx.sim(dt=float(a["dt_rel"]) * R * R, horizon=float(a["horizon_rel"]) * R * R)
        inner = Ball(tuple(ctx.x0), frac * R)
        res = ctx.walk(sim, domain=Ball(tuple(ctx.x0), R), occupation_sets=[inner], bridge=bool(a["bridge"]))
        m, s = _mean_se(res.occupation[:, 0])
        fn = inner.volume() ** (1.0 / p)
        vals.append(m)
        ses.append(s)
        norm_ratio.append(m / fn)
        oracle.append(_or.bm_occupation_ball(d, R, frac * R) if d >= 2 else math.nan)
        qs.append(Quantity("occupation", {"R": R}, m, s, R))
        qs.append(Quantity("occupation_over_lp_norm", {"R": R, "p": p}, m / fn, s / fn, R))
    f = _safe_power_fit(radii, norm_ratio, np.asarray(ses) / np.asarray(vals) * np.asarray(norm_ratio))
    ref = 2 - d / p if not a["wrong_exponent"] else 2.0
    e = {"values": vals, "stderr": ses, "oracle": oracle, "slope": None if f is None else f.slope, "reference": ref}
    return _Measured(e, qs, {"occupation_vs_R": _fit_dict(f)} if f else {})


def _oracle_close(vals, ses, refs, rel):
    return all(abs(v - r) <= 3 * s + rel * abs(r) for v, s, r in zip(vals, ses, refs))


def _j_exit_occupation(e, tol, bm):
    s = e["slope"]
    return [
        _always("finite_positive", _finite_pos(e["values"])),
        _oracle("radius_slope", bm, s is not None and abs(s - e["reference"]) <= tol["slope_tol"], f"slope {s} vs {e['reference']:.4f}"),
        _oracle("oracle_values", bm, _oracle_close(e["values"], e["stderr"], e["oracle"], tol["rel_tol"])),
    ]


def _m_occupation_clock(ctx):
    a, d = ctx.a, ctx.d
    ctx.require_dim(3)
    R = float(a["radius"])
    vals, ses, refs = [], [], []
    qs = []
    for lam in [float(x) for x in a["lams"]]:
        sim = ctx.sim(horizon=float(a["horizon_factor"]) / lam + 10.0 * R * R)
        res = _stop.walk_ensemble(
            sim, ctx.drift, ctx.diffusion, occupation_sets=[Ball(tuple(ctx.x0), R)], discount="kill", lam=lam, clock_radius=R
        )
        res.require_clean(max_censored=1e-3)
        m, s = _mean_se(res.occupation[:, 0])
        vals.append(m)
        ses.append(s)
        refs.append(_or.bm_half_discounted(lam, R, float(a["generator_factor"])))
        qs.append(Quantity("half_discounted_occupation", {"lam": lam, "R": R}, m, s, lam))
    qs.append(Quantity("undiscounted_limit_oracle", {"R": R}, R * R))
    return _Measured({"values": vals, "stderr": ses, "oracle": refs}, qs)


def _j_occupation_clock(e, tol, bm):
    v, s = np.asarray(e["values"]), np.asarray(e["stderr"])
    mono = bool(np.all(np.diff(v) <= 3 * np.sqrt(s[1:] ** 2 + s[:-1] ** 2)))
    return [
        _always("finite_positive", _finite_pos(v)),
        _always("monotone_in_lambda", mono),
        _oracle("oracle_values", bm, _oracle_close(e["values"], e["stderr"], e["oracle"], tol["rel_tol"]),
                f"{np.round(v, 4).tolist()} vs {np.round(e['oracle'], 4).tolist()}"),
    ]  # fmt: skip


# ---------------------------------------------------------------------------
# maximum principle, decay, Lin estimate (materialized paths and quadrature)


def _u_family(eps, bump_radius, d):
    bump = _sim.TestFunction.bump(np.zeros(d), bump_radius)
    return _sim.TestFunction(
        lambda x: np.einsum("ij,ij->i", x, x) + eps * bump.value(x),
        lambda x: 2 * x + eps * bump.grad(x),
        lambda x: 2 * np.eye(x.shape[1])[None] + eps * bump.hess(x),
        f"square_plus_{eps:g}_bump",
    )


def _ball_grid(d, R, m):
    ax = -R + (np.arange(m) + 0.5) * (2 * R / m)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    keep = np.einsum("ij,ij->i", pts, pts) <= R * R
    return pts[keep], (2 * R / m) ** d


def _m_max_principle(ctx):
    a, d = ctx.a, ctx.d
    p = _p(a, d)
    g = float(a["generator_factor"])
    eps_list = [float(x) for x in a["eps_list"]]
    fams = [_u_family(eps, float(a["bump_radius"]), d) for eps in eps_list]
    sup_bd = 1.0  # |x|^2 on the unit sphere, bump vanishes there
    quad_pts, vol = _ball_grid(d, 1.0, int(a["resolution"]))
    lneg_norm = []
    for u in fams:
        lu = _sim._generator(u, quad_pts, ctx.drift, ctx.diffusion)
        lneg_norm.append(float(np.sum(np.maximum(-lu, 0.0) ** p) * vol) ** (1 / p))
    qs = []
    rows = []
    for s0 in [float(x) for x in a["start_radii"]]:
        x0 = ctx.e1(s0)
        sim = ctx.sim(start_point=tuple(x0))
        A = np.zeros((len(fams), sim.n_paths))
        An = np.zeros_like(A)
        B = np.zeros_like(A)
        censored = 0
        for j, path in enumerate(_sim.simulate_ensemble(sim, ctx.drift, ctx.diffusion)):
            x = path.positions
            out = np.flatnonzero(np.einsum("ij,ij->i", x, x) > 1.0)
            K = int(out[0]) if out.size else x.shape[0] - 1
            censored += out.size == 0
            xs = x[:K]
            capped = _sim._path_drift(path, ctx.drift)
            for i, u in enumerate(fams):
                lu = _sim._generator(u, xs, capped, ctx.diffusion, g) if K else np.zeros(0)
                A[i, j] = lu.sum() * path.dt
                An[i, j] = np.maximum(-lu, 0).sum() * path.dt
                B[i, j] = u.value(x[K : K + 1])[0]
        for i, (eps, u) in enumerate(zip(eps_list, fams)):
            u0 = float(u.value(x0[None])[0])
            rep, rep_se = _mean_se(B[i] - A[i])
            bnd, bnd_se = _mean_se(An[i])
            rows.append({"start": s0, "eps": eps, "u0": u0, "rep": rep, "rep_se": rep_se, "neg": bnd, "neg_se": bnd_se,
                         "boundary_mean": float(B[i].mean()), "boundary_se": _mean_se(B[i])[1], "censored": censored / sim.n_paths})  # fmt: skip
            qs.append(Quantity("dynkin_representation", {"start": s0, "eps": eps}, rep, rep_se, s0))
            qs.append(Quantity("negative_part_integral", {"start": s0, "eps": eps}, bnd, bnd_se, s0))
    nhat = []
    for i, eps in enumerate(eps_list):
        excess = max(r["u0"] - sup_bd for r in rows if r["eps"] == eps)
        nhat.append(max(excess, 0.0) / lneg_norm[i] if lneg_norm[i] > 0 else (0.0 if excess <= 0 else math.inf))
        qs.append(Quantity("fitted_constant", {"eps": eps, "p": p}, nhat[-1], math.nan, eps))
    return _Measured({"rows": rows, "sup_boundary": sup_bd, "nhat": nhat, "eps": eps_list}, qs)


def _j_max_principle(e, tol, bm):
    rows = e["rows"]
    rel = tol["rel_tol"]
    rep_ok = all(abs(r["u0"] - r["rep"]) <= 3 * r["rep_se"] + rel * max(1.0, abs(r["u0"])) for r in rows)
    bound_ok = all(r["u0"] <= r["neg"] + e["sup_boundary"] + 3 * r["neg_se"] + rel * max(1.0, abs(r["u0"])) for r in rows)
    sub = [r for r in rows if r["eps"] == 0]
    sub_ok = all(r["boundary_mean"] >= r["u0"] - 3 * r["boundary_se"] for r in sub)
    return [
        _always("censoring_small", all(r["censored"] <= 1e-3 for r in rows)),
        _always("finite_constant", all(math.isfinite(v) for v in e["nhat"])),
        _oracle("dynkin_representation", bm, rep_ok),
        _oracle("negative_part_bound", bm, bound_ok),
        _oracle("subharmonic_maximum_on_boundary", bm, sub_ok),
    ]


def _m_decay_halfball(ctx):
    a, d = ctx.a, ctx.d
    p = _p(a, d)
    R = float(a["radius"])
    g = float(a["generator_factor"])
    lams = [float(x) for x in a["lams"]]
    fr = [float(x) for x in a["sample_fractions"]]
    taus = []
    for f in fr:
        sim = ctx.sim(start_point=tuple(ctx.e1(f * R)))
        res = ctx.walk(sim, domain=Ball(tuple(np.zeros(d)), R), bridge=bool(a["bridge"]))
        if res.censored_fraction > 1e-3:
            raise _green.HorizonError("too many censored paths; increase the horizon")
        taus.append(res.stop_times)
    qs, vals, ses, refs, norms = [], [], [], [], []
    radii = np.asarray(fr) * R
    for lam in lams:
        u = []
        for f, t in zip(fr, taus):
            m, s = _mean_se(np.exp(-lam * t))
            u.append(m)
            vals.append(m)
            ses.append(s)
            refs.append(_or.bm_laplace_exit(d, R, f * R, lam, g))
            qs.append(Quantity("laplace_exit", {"lam": lam, "r": f * R}, m, s, f * R))
        # radial quadrature of |u|^p over B_{R/2}
        w = sphere_area(d) * radii ** (d - 1) * np.asarray(u) ** p
        nrm = float(trapezoid(w, radii)) ** (1 / p)
        norms.append(nrm)
        qs.append(Quantity("halfball_lp_norm", {"lam": lam, "p": p}, nrm, math.nan, lam))
    try:
        b, _, _, _, ci, _, _ = fit_line(np.sqrt(lams), np.log(norms))
        fit = {"slope": b, "slope_ci": list(ci)}
    except (FitError, ValueError):
        fit = None
    e = {"values": vals, "stderr": ses, "oracle": refs, "norms": norms, "fit": fit}
    return _Measured(e, qs, {"log_norm_vs_sqrt_lambda": fit} if fit else {})


def _j_decay_halfball(e, tol, bm):
    n = np.asarray(e["norms"])
    fit = e["fit"]
    return [
        _always("finite_positive", _finite_pos(n)),
        _always("decreasing_in_lambda", bool(np.all(np.diff(n) < 0))),
        _always("exponential_decay", fit is not None and fit["slope_ci"][1] < 0),
        _oracle("oracle_values", bm, _oracle_close(e["values"], e["stderr"], e["oracle"], tol["rel_tol"])),
    ]


def _m_lin_estimate(ctx):
    a, d = ctx.a, ctx.d
    p = _p(a, d)
    mu = float(a["mu"])
    R = float(a["radius"])
    m0 = int(a["resolution"])
    widths = [float(s) for s in a["widths"]]
    out = {m0: [], 2 * m0: []}
    qs = []
    for m in (m0, 2 * m0):
        for s in widths:
            u = _sim.TestFunction.bump(np.zeros(d), s)
            lhs = 0.0
            lp = 0.0
            pts, vol = _ball_grid(d, min(s, R), m)
            for k in range(0, pts.shape[0], 50_000):
                x = pts[k : k + 50_000]
                h = u.hess(x)
                hn = np.sqrt(np.einsum("kij,kij->k", h, h))
                lhs += float(np.sum(hn ** (1 / (2 * mu)))) * vol
                lu = _sim._generator(u, x, ctx.drift, ctx.diffusion)
                lp += float(np.sum(np.abs(lu) ** p)) * vol
            lhs = lhs ** (2 * mu)
            # the bumps vanish on the boundary, so only the L_p term of Lu remains
            rhs = lp ** (1 / p)
            out[m].append(lhs / rhs)
            if m == m0:
                qs.append(Quantity("lin_ratio", {"width": s, "mu": mu, "p": p}, lhs / rhs, math.nan, s))
    coarse, fine = np.asarray(out[m0]), np.asarray(out[2 * m0])
    change = float(np.max(np.abs(fine - coarse) / fine))
    growth = float(np.max(fine) / fine[0])
    return _Measured({"ratios": fine.tolist(), "refine_change": change, "growth": growth}, qs)


def _j_lin_estimate(e, tol, bm):
    return [
        _always("finite_positive", _finite_pos(e["ratios"])),
        _always("quadrature_converged", e["refine_change"] <= tol["refine_tol"], f"change {e['refine_change']:.4f}"),
        _oracle("ratio_bounded_over_family", bm, e["growth"] <= tol["growth_max"], f"max/first {e['growth']:.4f}"),
    ]


# ---------------------------------------------------------------------------
# small sets


def _m_smallset_occupation(ctx):
    a, d = ctx.a, ctx.d
    R = float(a["domain_radius"])
    radii = [float(r) for r in a["radii"]]
    centre = tuple(np.zeros(d))
    sim = ctx.sim()
    res = ctx.walk(sim, domain=Ball(centre, R), occupation_sets=[Ball(centre, r) for r in radii], bridge=bool(a["bridge"]))
    vals, ses, refs = [], [], []
    qs = []
    gam = [(r / R) ** d for r in radii]
    at_centre = bool(np.allclose(ctx.x0, 0))
    for i, r in enumerate(radii):
        # trapezoid rule: the start point counts for half a step
        start_in = float(np.linalg.norm(np.asarray(ctx.x0) - np.asarray(centre)) < r)
        m, s = _mean_se(res.occupation[:, i] - 0.5 * sim.dt * start_in)
        vals.append(m)
        ses.append(s)
        refs.append(_or.bm_occupation_ball(d, R, r) if at_centre else math.nan)
        qs.append(Quantity("occupation", {"r": r, "gamma": gam[i]}, m, s, gam[i]))
    f = _safe_power_fit(gam, vals, ses)
    ref = float(a["slope_ref"]) if a.get("slope_ref") is not None else 2.0 / d
    e = {"values": vals, "stderr": ses, "oracle": refs, "slope": None if f is None else f.slope, "reference": ref}
    return _Measured(e, qs, {"occupation_vs_gamma": _fit_dict(f)} if f else {})


def _j_smallset_occupation(e, tol, bm):
    s = e["slope"]
    out = [
        _always("finite_positive", _finite_pos(e["values"])),
        _always("positive_exponent", s is not None and s > 0, f"fitted exponent {s}"),
        _oracle("gamma_slope", bm, s is not None and abs(s - e["reference"]) <= tol["slope_tol"], f"slope {s} vs {e['reference']:.4f}"),
    ]
    if all(math.isfinite(r) for r in e["oracle"]):
        out.append(_oracle("oracle_values", bm, _oracle_close(e["values"], e["stderr"], e["oracle"], tol["rel_tol"])))
    return out


def _hitting_oracle(d, r, R, rho, exponent):
    if exponent == 0:
        return math.log(R / rho) / math.log(R / r)
    return (rho**exponent - R**exponent) / (r**exponent - R**exponent)


def _m_smallset_hitting(ctx):
    a, d = ctx.a, ctx.d
    R = float(a["domain_radius"])
    rho = float(a["start_radius"])
    centre = tuple(np.zeros(d))
    expo = (2 - d) - (1 if a["wrong_exponent"] else 0)
    vals, ses, refs = [], [], []
    qs = []
    radii = [float(r) for r in a["radii"]]
    for r in radii:
        sim = ctx.sim(start_point=tuple(ctx.e1(rho)))
        res = ctx.walk(sim, domain=Ball(centre, R), target=Ball(centre, r), stop_on_hit=True, bridge=bool(a["bridge"]))
        m, s = _mean_se(res.hit.astype(float))
        vals.append(m)
        ses.append(s)
        refs.append(_hitting_oracle(d, r, R, rho, expo))
        qs.append(Quantity("hitting_probability", {"r": r, "start_radius": rho}, m, s, (r / R) ** d))
    gam = [(r / R) ** d for r in radii]
    f = _safe_power_fit(gam, vals, ses)
    e = {"values": vals, "stderr": ses, "oracle": refs, "slope": None if f is None else f.slope}
    return _Measured(e, qs, {"hitting_vs_gamma": _fit_dict(f)} if f else {})


def _j_smallset_hitting(e, tol, bm):
    v = np.asarray(e["values"])
    z = [abs(x - r) / s if s > 0 else (0.0 if x == r else math.inf) for x, s, r in zip(e["values"], e["stderr"], e["oracle"])]
    return [
        _always("finite_positive", _finite_pos(v) and bool(np.all(v <= 1))),
        _always("increasing_in_radius", bool(np.all(np.diff(v) >= 0))),
        _oracle("oracle_values", bm, max(z) <= tol["z_max"], f"max z {max(z):.3f}"),
    ]


def _m_occupation_tail(ctx):
    a, d = ctx.a, ctx.d
    R = float(a["domain_radius"])
    radii = [float(r) for r in a["radii"]]
    centre = tuple(np.zeros(d))
    sim = ctx.sim(start_point=tuple(ctx.e1(float(a["start_radius"]))))
    res = ctx.walk(sim, domain=Ball(centre, R), occupation_sets=[Ball(centre, r) for r in radii], bridge=bool(a["bridge"]))
    gam = np.asarray([(r / R) ** d for r in radii])
    means = res.occupation.mean(axis=0)
    f = _safe_power_fit(gam, means)
    qs = []
    if f is None:
        return _Measured({"mu": None, "probs": [], "slope": None}, qs)
    mu, c = f.slope, math.exp(f.intercept)
    thr = float(a["theta_factor"]) * c * gam**mu * R * R
    probs, ses = [], []
    for i, r in enumerate(radii):
        m, s = _mean_se((res.occupation[:, i] >= thr[i]).astype(float))
        probs.append(m)
        ses.append(s)
        qs.append(Quantity("tail_probability", {"r": r, "threshold": thr[i]}, m, s, gam[i]))
    fp = _safe_power_fit(gam, probs, ses)
    e = {"mu": mu, "probs": probs, "slope": None if fp is None else fp.slope, "factor": float(a["exponent_factor"])}
    fits = {"occupation_vs_gamma": _fit_dict(f)}
    if fp:
        fits["tail_probability_vs_gamma"] = _fit_dict(fp)
    return _Measured(e, qs, fits)


def _j_occupation_tail(e, tol, bm):
    ok = e["mu"] is not None and e["slope"] is not None
    bound = e["factor"] * e["mu"] + tol["slope_tol"] if ok else math.nan
    return [
        _always("finite_positive", ok and _finite_pos(e["probs"]) and e["mu"] > 0),
        _oracle("tail_exponent_bound", bm, ok and e["slope"] <= bound, f"slope {e['slope']} vs bound {bound}"),
    ]


def _m_antiholder(ctx):
    a, d = ctx.a, ctx.d
    mu = float(a["mu"])
    R = float(a["domain_radius"])
    balls = [Ball(tuple(ctx.e1(float(c))), float(r)) for c, r in a["balls"]]
    for b in balls:
        if np.linalg.norm(b.center) + b.radius > R:
            raise _stop.PreconditionError("test balls must lie inside the domain")
    sim = ctx.sim()
    res = ctx.walk(sim, domain=Ball(tuple(np.zeros(d)), R), occupation_sets=balls, bridge=bool(a["bridge"]))
    qs, nhat, occ = [], [], []
    for i, b in enumerate(balls):
        m, s = _mean_se(res.occupation[:, i])
        lhs = b.volume()
        rhs = R ** (d - 1 / mu) * m ** (1 / (2 * mu))
        occ.append(m)
        nhat.append(lhs / rhs if rhs > 0 else math.inf)
        qs.append(Quantity("occupation", {"center": b.center[0], "radius": b.radius}, m, s, b.radius))
        qs.append(Quantity("antiholder_ratio", {"center": b.center[0], "radius": b.radius, "mu": mu}, nhat[-1], math.nan, b.radius))
    return _Measured({"occupation": occ, "nhat": nhat}, qs)


def _j_antiholder(e, tol, bm):
    n = np.asarray(e["nhat"])
    return [
        _always("finite_positive", _finite_pos(e["occupation"]) and _finite_pos(n)),
        _oracle("ratio_bounded", bm, float(n.max()) <= tol["n_max"], f"max ratio {n.max():.4f}"),
    ]


def _m_density_exit(ctx):
    a, d = ctx.a, ctx.d
    R = float(a["domain_radius"])
    xis = [float(x) for x in a["xis"]]
    hole_c = tuple(np.zeros(d))
    holes = [Ball(hole_c, (1 - xi) ** (1 / d) * R) for xi in xis]
    sim = ctx.sim()
    res = ctx.walk(sim, domain=Ball(tuple(np.zeros(d)), R), occupation_sets=holes, bridge=bool(a["bridge"]))
    tau = res.stop_times
    qs, comp, ses, refs = [], [], [], []
    at_centre = bool(np.allclose(ctx.x0, 0))
    for i, xi in enumerate(xis):
        r, s = _ratio_se(res.occupation[:, i], tau)
        comp.append(r)
        ses.append(s)
        refs.append(_or.bm_occupation_ball(d, R, holes[i].radius) / _or.bm_exit_moment(d, R, 0.0) if at_centre else math.nan)
        qs.append(Quantity("occupation_fraction", {"xi": xi}, 1 - r, s, xi))
    f = _safe_power_fit([1 - x for x in xis], comp, ses)
    ref = float(a["slope_ref"]) if a.get("slope_ref") is not None else 1.0 / d
    e = {"complement": comp, "stderr": ses, "oracle": refs, "slope": None if f is None else f.slope, "reference": ref}
    return _Measured(e, qs, {"missing_fraction_vs_hole": _fit_dict(f)} if f else {})


def _j_density_exit(e, tol, bm):
    c = np.asarray(e["complement"])
    s = e["slope"]
    out = [
        _always("fraction_in_unit_interval", bool(np.all((c >= 0) & (c < 1)))),
        _always("fraction_increasing_in_density", bool(np.all(np.diff(c) <= 0))),
        _oracle("decay_at_least_reference", bm, s is not None and s >= e["reference"] - tol["slope_tol"], f"slope {s} vs {e['reference']:.4f}"),
    ]
    if all(math.isfinite(r) for r in e["oracle"]):
        out.append(_oracle("oracle_values", bm, _oracle_close(e["complement"], e["stderr"], e["oracle"], tol["rel_tol"])))
    return out


# ---------------------------------------------------------------------------
# boundary behaviour


def _m_boundary_escape(ctx):
    a, d = ctx.a, ctx.d
    R = float(a["domain_radius"])
    dist = [float(s) for s in a["distances"]]
    plane = Halfspace(tuple(-np.eye(d)[0]), 0.0)
    qs, vals, ses = [], [], []
    for s in dist:
        sim = ctx.sim(start_point=tuple(ctx.e1(s * R)))
        res = ctx.walk(sim, domain=Ball(tuple(np.zeros(d)), R), target=plane, stop_on_hit=True, bridge=True)
        m, se = _mean_se((res.exited & ~res.hit).astype(float))
        vals.append(m)
        ses.append(se)
        qs.append(Quantity("escape_probability", {"distance": s}, m, se, s))
    f = _safe_power_fit(dist, vals, ses)
    e = {"values": vals, "slope": None if f is None else f.slope, "reference": float(a["exponent_ref"])}
    return _Measured(e, qs, {"escape_vs_distance": _fit_dict(f)} if f else {})


def _j_boundary_escape(e, tol, bm):
    s = e["slope"]
    return [
        _always("finite_positive", _finite_pos(e["values"])),
        _always("positive_exponent", s is not None and s > 0),
        _oracle("distance_slope", bm, s is not None and abs(s - e["reference"]) <= tol["slope_tol"], f"slope {s} vs {e['reference']}"),
    ]


def _m_boundary_modulus(ctx):
    a, d = ctx.a, ctx.d
    dist = [float(s) for s in a["distances"]]
    c = np.zeros(d)
    c[0] = 1.0
    dom = Ball(tuple(c), 1.0)
    qs, vals, ses, refs, osc = [], [], [], [], []
    for s in dist:
        x0 = ctx.e1(s)
        dt = min(ctx.cfg.sim.dt, float(a["dt_rel"]) * s * s)
        sim = ctx.sim(start_point=tuple(x0), dt=dt)
        res = ctx.walk(sim, domain=dom, bridge=True)
        if res.censored_fraction > 1e-3:
            raise _green.HorizonError("too many censored paths; increase the horizon")
        m, se = _mean_se(res.stop_times)
        vals.append(m)
        ses.append(se)
        refs.append((1 - (1 - s) ** 2) / d)
        qs.append(Quantity("expected_exit_time", {"distance": s}, m, se, s))
        g = np.sqrt(np.linalg.norm(res.end_positions, axis=1))
        mg, sg = _mean_se(g)
        osc.append(mg)
        qs.append(Quantity("boundary_data_oscillation", {"distance": s, "modulus": "sqrt"}, mg, sg, s))
    f = _safe_power_fit(dist, vals, ses)
    beta = None if f is None else f.slope
    const = None
    if beta is not None:
        const = float(max(o**2 / s ** (beta / 2) for o, s in zip(osc, dist)))
        qs.append(Quantity("oscillation_constant", {"beta": beta}, const))
    e = {"values": vals, "stderr": ses, "oracle": refs, "slope": beta, "reference": float(a["exponent_ref"]), "constant": const}
    return _Measured(e, qs, {"exit_time_vs_distance": _fit_dict(f)} if f else {})


def _j_boundary_modulus(e, tol, bm):
    s = e["slope"]
    return [
        _always("finite_positive", _finite_pos(e["values"])),
        _always("positive_exponent", s is not None and s > 0),
        _always("finite_oscillation_constant", e["constant"] is not None and math.isfinite(e["constant"])),
        _oracle("distance_slope", bm, s is not None and abs(s - e["reference"]) <= tol["slope_tol"], f"slope {s} vs {e['reference']}"),
        _oracle("oracle_values", bm, _oracle_close(e["values"], e["stderr"], e["oracle"], tol["rel_tol"])),
    ]


# ---------------------------------------------------------------------------
# tubes, near occupation, doubling, A_infinity


def _m_tube(ctx):
    a, d = ctx.a, ctx.d
    R = float(a["radius"])
    kappa = float(a["kappa"])
    ns = [int(n) for n in a["lengths"]]
    qs, P, Pse, Tm, Tse = [], [], [], [], []
    for n in ns:
        cyl = Cylinder(float(n), R, d)
        x0 = ctx.e1(R)
        sim = ctx.sim(start_point=tuple(x0))
        res = ctx.walk(sim, domain=cyl, bridge=bool(a["bridge"]))
        succ = res.tube_outcomes(kappa) == "success"
        m, s = _mean_se(succ.astype(float))
        P.append(m)
        Pse.append(s)
        t = res.stop_times[succ]
        tm, ts = _mean_se(t) if t.size > 1 else (math.nan, math.nan)
        Tm.append(tm)
        Tse.append(ts)
        qs.append(Quantity("success_probability", {"n": n, "kappa": kappa}, m, s, n))
        qs.append(Quantity("mean_success_time", {"n": n, "kappa": kappa}, tm, ts, n))
    e = {"P": P, "T": Tm, "rate_ref": float(a["rate_factor"]) * _or.bm_tube_rate(d, R)}
    fits = {}
    if all(p > 0 for p in P):
        b, i, bse, _, ci, _, r2 = fit_line(ns, np.log(P), np.asarray(Pse) / np.asarray(P))
        e.update(slope=b, r2=r2, p0=math.exp(b))
        fits["log_success_vs_n"] = {"slope": b, "slope_ci": list(ci), "intercept": i, "r_squared": r2}
        qs.append(Quantity("fitted_p0", {}, math.exp(b), math.exp(b) * bse))
    if all(math.isfinite(t) for t in Tm) and all(s > 0 for s in Tse):
        b, i, _, _, ci, _, r2 = fit_line(ns, Tm, Tse)
        e.update(time_slope=b, time_ci=list(ci))
        fits["success_time_vs_n"] = {"slope": b, "slope_ci": list(ci), "intercept": i, "r_squared": r2}
    return _Measured(e, qs, fits)


def _j_tube(e, tol, bm):
    has = "slope" in e
    out = [_always("success_observed", has and _finite_pos(e["P"]))]
    out.append(_oracle("geometric_law", bm, has and e["r2"] >= tol["r2_min"], f"R^2 {e.get('r2')}"))
    out.append(_oracle("p0_in_unit_interval", bm, has and 0 < e["p0"] < 1, f"p0 {e.get('p0')}"))
    out.append(_oracle("time_grows_linearly", bm, "time_ci" in e and e["time_ci"][0] > 0, f"slope CI {e.get('time_ci')}"))
    ok = has and abs(-e["slope"] - e["rate_ref"]) <= tol["rate_tol"] * e["rate_ref"]
    out.append(_oracle("decay_rate", bm, ok, f"rate {-e['slope'] if has else None} vs {e['rate_ref']:.4f}"))
    return out


def _m_near_occupation(ctx):
    a, d = ctx.a, ctx.d
    R = float(a["radius"])
    g = float(a["generator_factor"])
    centres = [float(c) for c in a["centers"]]
    balls = [Ball(tuple(ctx.e1(c)), R) for c in centres]
    sim = ctx.sim(start_point=tuple(np.zeros(d)))
    res = ctx.walk(sim, domain=Ball(tuple(np.zeros(d)), 2 * R), occupation_sets=balls, bridge=bool(a["bridge"]))
    qs, vals, ses, refs = [], [], [], []
    for i, c in enumerate(centres):
        m, s = _mean_se(res.occupation[:, i])
        vals.append(m)
        ses.append(s)
        refs.append(_or.bm_domain_green_ball_mass(d, 2 * R, ctx.e1(c), R) * 0.5 / g if d in (2, 3) else math.nan)
        qs.append(Quantity("near_occupation", {"center": c, "R": R}, m, s, c))
        qs.append(Quantity("near_occupation_over_R2", {"center": c, "R": R}, m / R**2, s / R**2, c))
    return _Measured({"values": vals, "stderr": ses, "oracle": refs, "const": min(vals) / R**2}, qs)


def _j_near_occupation(e, tol, bm):
    z = [abs(v - r) / s for v, s, r in zip(e["values"], e["stderr"], e["oracle"])]
    return [
        _always("positive_constant", _finite_pos(e["values"]) and e["const"] > 0),
        _oracle("oracle_values", bm, max(z) <= tol["z_max"] if all(map(math.isfinite, z)) else False, f"max z {max(z):.3f}"),
    ]


def _doubling_balls(a, d):
    rng = np.random.default_rng(int(a["placement_seed"]))
    lo, hi = a["radius_range"]
    out = []
    while len(out) < int(a["n_placements"]):
        r = rng.uniform(lo, hi)
        if not out:
            c = np.zeros(d)
        else:
            v = rng.normal(size=d)
            c = v / np.linalg.norm(v) * rng.uniform(0, 1 - 2 * r)
        out.append(Ball(tuple(c), r))
    return out


def _reference_kernel(d, shift, R=1.0):
    if d == 2 and shift == 0:
        return lambda r: math.log(R / r) / math.pi
    e = (d - 2) + shift
    cd = math.gamma(d / 2 - 1) / (2 * math.pi ** (d / 2)) if d > 2 else 1.0 / math.pi
    return lambda r: cd * (r**-e - R**-e)


def _m_doubling(ctx):
    a, d = ctx.a, ctx.d
    ctx.require_dim(2, 3)
    balls = _doubling_balls(a, d)
    sets = []
    for b in balls:
        sets += [b, Ball(b.center, b.radius / 2)]
    sim = ctx.sim(start_point=tuple(np.zeros(d)))
    res = ctx.walk(sim, domain=Ball(tuple(np.zeros(d)), 1.0), occupation_sets=sets, bridge=bool(a["bridge"]))
    if res.censored_fraction > _green.MAX_CENSORED:
        raise _green.HorizonError("too many censored paths; increase the horizon")
    kern = _reference_kernel(d, int(a["kernel_exponent_shift"]))
    qs, ratios, ses, refs = [], [], [], []
    for i, b in enumerate(balls):
        r, s = _ratio_se(res.occupation[:, 2 * i], res.occupation[:, 2 * i + 1])
        cn = float(np.linalg.norm(b.center))
        ref = _or.kernel_ball_mass(kern, d, cn, b.radius) / _or.kernel_ball_mass(kern, d, cn, b.radius / 2)
        ratios.append(r)
        ses.append(s)
        refs.append(ref)
        qs.append(Quantity("doubling_ratio", {"placement": i, "center_norm": cn, "radius": b.radius}, r, s, b.radius))
    return _Measured({"ratios": ratios, "stderr": ses, "reference": refs}, qs)


def _j_doubling(e, tol, bm):
    r = np.asarray(e["ratios"])
    rel = np.abs(r / np.asarray(e["reference"]) - 1)
    return [
        _always("bounded_over_placements", _finite_pos(r) and bool(np.all(r >= 1)) and float(r.max()) <= tol["ratio_max"], f"max {r.max():.3f}"),
        _oracle("kernel_ratio", bm, float(rel.max()) <= tol["rel_tol"], f"max relative deviation {rel.max():.4f}"),
    ]


def _synthetic_estimate(grid, values):
    d = len(grid.lo)
    return _green.GreenEstimate(grid, values, np.zeros_like(values), None, 1, 0, np.zeros(d), 0.0, 0.0)


def _m_a_infty(ctx):
    a, d = ctx.a, ctx.d
    ctx.require_dim(2, 3)
    c = np.asarray(a["ball_center"][:d] if a.get("ball_center") is not None else np.zeros(d), float)
    rho = float(a["ball_radius"])
    if np.linalg.norm(c) + 2 * rho > 1.0 + 1e-12:
        raise _stop.PreconditionError("the doubled ball must lie inside the unit domain")
    grid = _green.grid_for(np.zeros(d), 1.0, float(a["cell"]))
    ball = Ball(tuple(c), rho)
    gam = [float(g) for g in a["gammas"]]
    conc = [Ball(tuple(c), rho * g ** (1 / d)) for g in gam]
    cen = grid.centers()
    shape = (grid.n,) * d
    uni = _synthetic_estimate(grid, np.ones(shape))
    alpha = float(a["alpha"])
    pw = _synthetic_estimate(grid, (np.linalg.norm(cen - c, axis=1) ** alpha).reshape(shape))
    fu = _green.a_infty_exponent_fit(uni, ball, conc)
    fp = _green.a_infty_exponent_fit(pw, ball, conc)
    sim = ctx.sim(start_point=tuple(np.zeros(d)))
    est = _green.estimate_domain_green(sim, ctx.drift, ctx.diffusion, Ball(tuple(np.zeros(d)), 1.0), grid)
    fm = _green.a_infty_exponent_fit(est, ball, _green.worst_case_family(est, ball, gam), gam)
    ref_p = (d + alpha) / d if not a["wrong_exponent"] else alpha / d
    qs = [
        Quantity("a_infty_exponent", {"density": "uniform"}, fu.smallset_mu),
        Quantity("a_infty_exponent", {"density": "power", "alpha": alpha}, fp.smallset_mu),
        Quantity("a_infty_exponent", {"density": "estimated", "family": "worst_case"}, fm.smallset_mu),
        Quantity("a_infty_constant", {"density": "estimated"}, fm.constant),
    ]
    for g, r in zip(fm.gammas, fm.ratios):
        qs.append(Quantity("measure_ratio", {"density": "estimated", "gamma": float(g)}, float(r), math.nan, float(g)))
    e = {"uniform": fu.smallset_mu, "power": fp.smallset_mu, "power_ref": ref_p, "mc": fm.smallset_mu, "holds": fm.holds,
         "mc_constant": fm.constant}  # fmt: skip
    fits = {"worst_case_family": {"slope": fm.smallset_mu, "slope_ci": list(fm.slope_ci), "constant": fm.constant}}
    return _Measured(e, qs, fits, {"domain": est})


def _j_a_infty(e, tol, bm):
    return [
        _always("uniform_density_exponent", abs(e["uniform"] - 1.0) <= tol["uniform_tol"], f"{e['uniform']:.5f}"),
        _always("power_density_exponent", abs(e["power"] - e["power_ref"]) <= tol["power_tol"], f"{e['power']:.4f} vs {e['power_ref']:.4f}"),
        _always("estimated_exponent_finite", math.isfinite(e["mc"]) and e["mc"] > 0 and math.isfinite(e["mc_constant"])),
        _oracle("estimated_exponent_at_least_one", bm, e["mc"] >= 1 - tol["uniform_tol"] and e["holds"], f"{e['mc']:.4f}"),
    ]


_MIN_SURVIVORS = 30


def _m_exit_tail(ctx):
    a, d = ctx.a, ctx.d
    R = float(a["radius"])
    times = np.linspace(float(a["t_min"]), float(a["t_max"]), int(a["n_times"]))
    sim = ctx.sim(horizon=float(times[-1]) + 2 * ctx.cfg.sim.dt)
    res = ctx.walk(sim, domain=Ball(tuple(np.zeros(d)), R), bridge=bool(a["bridge"]))
    ex = res.exit_times
    n = res.n_paths
    S = np.array([np.mean(ex > t) for t in times])
    if np.sum(S * n >= _MIN_SURVIVORS) < 3:
        # paths leave long before the nominal window: use the times between the
        # median exit time and the last time that still has enough survivors
        srt = np.sort(ex)
        lo, hi = srt[n // 2], srt[max(n - _MIN_SURVIVORS - 1, 0)]
        if np.isfinite(hi) and hi > lo:
            times = np.linspace(lo, hi, int(a["n_times"]))
            S = np.array([np.mean(ex > t) for t in times])
    se = np.sqrt(S * (1 - S) / n)
    qs = [Quantity("survival", {"T": float(t), "R": R}, float(s), float(e), float(t)) for t, s, e in zip(times, S, se)]
    ref = _or.bm_confinement_rate(d, R) * float(a["generator_factor"]) / 0.5
    e = {"S": S.tolist(), "reference": ref}
    fits = {}
    # fit only where the survival estimate is resolved
    use = S * n >= _MIN_SURVIVORS
    if np.sum(use) >= 3:
        tf, Sf = times[use], S[use]
        b, i, bse, _, ci, chi2, r2 = fit_line(tf, np.log(Sf), se[use] / Sf)
        rate = -b
        n_low = float(np.max(np.exp(-rate * tf) / Sf))
        n_up = float(np.max(Sf * np.exp(rate * tf)))
        e.update(rate=rate, n_low=n_low, n_up=n_up)
        fits["log_survival_vs_T"] = {"slope": b, "slope_ci": list(ci), "intercept": i, "r_squared": r2,
                                     "window": [float(tf[0]), float(tf[-1])]}
        qs.append(Quantity("fitted_rate", {"R": R}, rate, bse))
        qs.append(Quantity("lower_bound_constant", {"R": R}, n_low))
        qs.append(Quantity("upper_bound_constant", {"R": R}, n_up))
    return _Measured(e, qs, fits)


def _j_exit_tail(e, tol, bm):
    has = "rate" in e
    ok = has and abs(e["rate"] - e["reference"]) <= tol["rate_tol"] * e["reference"]
    return [
        _always("positive_rate", has and e["rate"] > 0),
        _always("two_sided_constants_finite", has and math.isfinite(e["n_low"]) and math.isfinite(e["n_up"])),
        _oracle("confinement_rate", bm, ok, f"rate {e.get('rate')} vs {e['reference']:.4f}"),
    ]


def _m_support(ctx):
    a, d = ctx.a, ctx.d
    R = float(a["domain_radius"])
    t = float(a["time"]) * R * R
    y = np.zeros(d)
    y[: len(a["target"])] = np.asarray(a["target"], float)[:d]
    sim = ctx.sim(horizon=t + 2 * ctx.cfg.sim.dt)
    res = _stop.walk_ensemble(sim, ctx.drift, ctx.diffusion, domain=Ball(tuple(np.zeros(d)), R), checkpoint_times=[t], bridge=bool(a["bridge"]))
    res.require_clean()
    pos = res.checkpoints[:, 0, :]
    alive = np.all(np.isfinite(pos), axis=1)
    dist = np.where(alive, np.linalg.norm(np.where(alive[:, None], pos, 0.0) - y, axis=1), np.inf)
    rhos = [float(r) for r in a["radii"]]
    vals, ses, qs = [], [], []
    for r in rhos:
        m, s = _mean_se((dist < r * R).astype(float))
        vals.append(m)
        ses.append(s)
        qs.append(Quantity("support_probability", {"rho": r, "t": t}, m, s, r))
    f = _safe_power_fit(rhos, vals, ses)
    ref = float(a["exponent_ref"]) if a.get("exponent_ref") is not None else float(d)
    e = {"values": vals, "slope": None if f is None else f.slope, "reference": ref}
    return _Measured(e, qs, {"probability_vs_rho": _fit_dict(f)} if f else {})


def _j_support(e, tol, bm):
    s = e["slope"]
    return [
        _always("finite_positive", _finite_pos(e["values"])),
        _always("positive_exponent", s is not None and s > 0),
        _oracle("rho_slope", bm, s is not None and abs(s - e["reference"]) <= tol["slope_tol"], f"slope {s} vs {e['reference']}"),
    ]


def _median_se(x):
    x = np.sort(np.asarray(x, float))
    n = x.size
    k = int(math.ceil(math.sqrt(n) / 2))
    lo, hi = x[max(0, n // 2 - k)], x[min(n - 1, n // 2 + k)]
    return float(np.median(x)), float((hi - lo) / 2)


def _m_nonexistence(ctx):
    from ..fields import make_example_field

    a, d = ctx.a, ctx.d
    contrast = make_example_field(a["contrast"]["kind"], d, **a["contrast"].get("params", {}))
    fields_ = [("candidate", ctx.drift), ("contrast", contrast)]
    if a["swap_roles"]:
        fields_ = [("candidate", contrast), ("contrast", ctx.drift)]
    med = {}
    qs = []
    for role, b in fields_:
        med[role] = []
        for dt in [float(x) for x in a["dts"]]:
            sim = ctx.sim(dt=dt, horizon=float(a["horizon"]), truncation_level=dt**-0.5)
            res = _stop.walk_ensemble(sim, b, ctx.diffusion).require_clean()
            m, s = _median_se(res.drift_integral)
            med[role].append(m)
            qs.append(Quantity("median_drift_integral", {"role": role, "field": b.kind, "dt": dt, "M": dt**-0.5}, m, s, dt))
    return _Measured({"candidate": med["candidate"], "contrast": med["contrast"]}, qs)


def _j_nonexistence(e, tol, bm):
    c, k = np.asarray(e["candidate"]), np.asarray(e["contrast"])
    change = abs(k[-1] - k[-2]) / k[-1] if k[-1] > 0 else math.inf
    return [
        _always("candidate_strictly_increasing", bool(np.all(np.diff(c) > 0)), f"{np.round(c, 3).tolist()}"),
        _always("candidate_exceeds_threshold", c[-1] > tol["blowup_threshold"]),
        _always("contrast_bounded", float(k.max()) <= tol["blowup_threshold"], f"{np.round(k, 3).tolist()}"),
        _always("contrast_converging", change <= tol["converge_tol"], f"last relative change {change:.4f}"),
    ]


# ---------------------------------------------------------------------------
# ink-spot growth (deterministic)


def _m_inkspots(ctx):
    a = ctx.a
    zeta = float(a["zeta"])
    m = int(a["m"])
    d = int(a["dim"])
    fx = _ink.fixture_suite(m=m, n_sets=int(a["n_sets"]), seed=int(a["fixture_seed"]), d=d)
    target = _ink.growth_target(d, zeta)
    factors, mono, caps, qs = [], [], [], []
    for i, g in enumerate(fx):
        r = _ink.grow_set(g, zeta, int(a["min_ball_cells"]), float(a["kappa"]))
        r2 = _ink.grow_set(g, zeta * float(a["zeta_ratio"]), int(a["min_ball_cells"]), float(a["kappa"]))
        factors.append(r.growth_factor)
        mono.append(bool(np.all(r2.grown.mask >= r.grown.mask)))
        sizes, stalled = _ink.iterate_growth(g, zeta, int(a["min_ball_cells"]))
        cap = _ink.iteration_cap(d, zeta, g.count, g.ambient_mask().sum())
        caps.append((len(sizes) - 1 <= cap) and not stalled)
        qs.append(Quantity("growth_factor", {"fixture": i}, r.growth_factor, math.nan, g.count / g.ambient_mask().sum()))
        qs.append(Quantity("shrunk_factor", {"fixture": i, "kappa": float(a["kappa"])}, r.shrunk_factor))
        qs.append(Quantity("iterations", {"fixture": i, "cap": cap}, float(len(sizes) - 1)))
    C = _ink.discretization_constant(factors, target, m)
    qs.append(Quantity("discretization_constant", {"m": m}, C))
    kappa_ok = all(q.estimate >= float(a["kappa"]) ** d for q in qs if q.name == "shrunk_factor")
    e = {"factors": factors, "target": target, "C": C, "m": m, "monotone": mono, "cap_ok": caps, "kappa_ok": kappa_ok}
    return _Measured(e, qs)


def _j_inkspots(e, tol, bm):
    f = np.asarray(e["factors"])
    ok = bool(np.all(f >= e["target"] * (1 - e["C"] / e["m"]) - 1e-12))
    return [
        _always("growth_bound", ok and e["C"] <= tol["c_max"], f"min factor {f.min():.4f}, C = {e['C']:.3f}"),
        _always("monotone_in_zeta", all(e["monotone"])),
        _always("iteration_cap", all(e["cap_ok"])),
        _always("shrunk_union_measure", e["kappa_ok"]),
    ]


# ---------------------------------------------------------------------------
# registry

def _exp(kind, anchor, defaults, negative, m, j, start_dim=2, **sim):
    return Experiment(kind, anchor, defaults, negative, m, j, start_dim, sim)


_KINDS = [
    _exp("resolvent_scaling", "lambda times the resolvent of a small-ball indicator stays in a fixed band",
         {"lams": [1.0, 10.0, 100.0, 10000.0], "dt_scale": 1e-3, "radius_exponent": 0.5},
         {"radius_exponent": 1.0}, _m_resolvent_scaling, _j_resolvent_scaling, 3),
    _exp("green_norm", "weighted L_q norm of the resolvent density scales as lambda^(d/(2p)-1)",
         {"lams": [0.25, 1.0, 4.0, 16.0], "ps": [3.0, 4.0], "weight_mu": 1.0, "half_width": 3.0, "cell": 0.2,
          "dt_scale": 1e-3, "wrong_exponent": False},
         {"wrong_exponent": True}, _m_green_norm, _j_green_norm, 3),
    _exp("reverse_holder", "L_q average of G_1 on a ball is controlled by its L_1 average on the double ball",
         {"p": 2.7, "n_balls": 50, "lam": 1.0, "cell": 0.1, "half_width": 2.0, "min_radius": 0.15, "max_radius": 0.5,
          "placement_radius": 1.0, "ball_seed": 1},
         {"p": 1.05}, _m_reverse_holder, _j_reverse_holder, 3),
    _exp("exit_floor", "discounted exit time from B_R is at least a fixed multiple of min(R^2, 1)",
         {"radii": [0.03, 0.1, 0.3, 1.0, 3.0], "dt_rel": 1e-3, "exponent": 2.0, "bridge": True},
         {"exponent": 1.0}, _m_exit_floor, _j_exit_floor),
    _exp("moment_factorial", "moments of occupation over [0, T] grow at most factorially with T-scaling 1-d/(2p)",
         {"horizons": [0.25, 1.0, 4.0, 16.0], "rho": 0.5, "p": None, "weight_mu": 1.0, "max_order": 4, "dt_rel": 1e-3,
          "wrong_exponent": False},
         {"wrong_exponent": True}, _m_moment_factorial, _j_moment_factorial),
    _exp("exit_occupation", "occupation before exit from B_R scales as R^(2-d/p) times the L_p norm",
         {"radii": [0.25, 0.5, 1.0, 2.0], "inner_fraction": 0.5, "p": None, "dt_rel": 1e-3, "horizon_rel": 5.0,
          "bridge": True, "wrong_exponent": False},
         {"wrong_exponent": True}, _m_exit_occupation, _j_exit_occupation),
    _exp("occupation_clock", "occupation with a clock running only outside B_R stays finite",
         {"lams": [0.25, 1.0, 4.0], "radius": 1.0, "horizon_factor": 20.0, "generator_factor": 0.5},
         {"generator_factor": 1.0}, _m_occupation_clock, _j_occupation_clock, 3),
    _exp("max_principle", "u is bounded by the L_p norm of (Lu)_- plus its boundary maximum",
         {"start_radii": [0.0, 0.3, 0.6], "eps_list": [0.0, 2.0, 4.0, 8.0], "bump_radius": 0.5, "p": None,
          "resolution": 96, "generator_factor": 0.5},
         {"generator_factor": 1.0}, _m_max_principle, _j_max_principle),
    _exp("decay_halfball", "interior L_p norms of lambda-harmonic functions decay exponentially in sqrt(lambda)",
         {"lams": [1.0, 4.0, 16.0, 64.0], "radius": 1.0, "sample_fractions": [0.0, 0.125, 0.25, 0.375, 0.5], "p": None,
          "bridge": True, "generator_factor": 0.5},
         {"generator_factor": 1.0}, _m_decay_halfball, _j_decay_halfball),
    _exp("lin_estimate", "a small power of |D^2 u| is controlled by the L_p norm of Lu",
         {"widths": [1.0, 0.5, 0.25, 0.125], "mu": 2.0, "p": None, "resolution": 48, "radius": 1.0},
         {"mu": 1.0 / 16}, _m_lin_estimate, _j_lin_estimate),
    _exp("smallset_occupation", "time spent in a set of relative measure gamma is at least a power of gamma",
         {"radii": [0.1, 0.15, 0.2, 0.3, 0.5], "domain_radius": 1.0, "slope_ref": None, "bridge": True},
         {"slope_ref": 1.0 / 3.0}, _m_smallset_occupation, _j_smallset_occupation, 3),
    _exp("smallset_hitting", "probability of reaching a set of relative measure gamma is at least a power of gamma",
         {"radii": [0.1, 0.15, 0.2, 0.3, 0.5], "domain_radius": 1.0, "start_radius": 0.6, "bridge": True,
          "wrong_exponent": False},
         {"wrong_exponent": True}, _m_smallset_hitting, _j_smallset_hitting, 3, n_paths=100000),
    _exp("occupation_tail", "occupation exceeds a fixed fraction of its scale with probability at least a power of gamma",
         {"radii": [0.1, 0.15, 0.2, 0.3, 0.4], "domain_radius": 1.0, "start_radius": 0.5, "theta_factor": 0.5,
          "exponent_factor": 2.0, "bridge": True},
         {"exponent_factor": 0.125}, _m_occupation_tail, _j_occupation_tail, 3),
    _exp("antiholder", "integral of f^(1/(2 mu)) is controlled by the expected occupation integral of f",
         {"balls": [[0.0, 0.05], [0.0, 0.1], [0.0, 0.2], [0.0, 0.4], [0.5, 0.1], [0.7, 0.2]], "mu": 2.0,
          "domain_radius": 1.0, "bridge": True},
         {"mu": 0.25}, _m_antiholder, _j_antiholder, 3),
    _exp("density_exit", "a set of density close to one takes a fixed fraction of the exit time",
     {"xis": [0.5, 0.7, 0.9, 0.97, 0.99], "domain_radius": 1.0, "slope_ref": None, "bridge": True},
     {"slope_ref": 1.0}, _m_density_exit, _j_density_exit, 3),
    _exp("boundary_escape", "escaping without touching a dense set decays as a power of the distance",
     {"distances": [0.01, 0.02, 0.05, 0.1, 0.2], "domain_radius": 1.0, "exponent_ref": 1.0},
     {"exponent_ref": 0.5}, _m_boundary_escape, _j_boundary_escape),
    _exp("boundary_modulus", "occupation before exit vanishes as a power of the distance to the boundary",
     {"distances": [0.01, 0.02, 0.05, 0.1, 0.2], "dt_rel": 0.01, "exponent_ref": 1.0},
     {"exponent_ref": 0.5}, _m_boundary_modulus, _j_boundary_modulus),
    _exp("tube", "passing through a tube of length n R succeeds with probability geometric in n",
     {"lengths": [2, 3, 4, 5], "kappa": 0.5, "radius": 1.0, "rate_factor": 1.0, "bridge": True},
     {"rate_factor": 2.0}, _m_tube, _j_tube),
    _exp("near_occupation", "time spent in B_R(x) before leaving B_2R is at least a fixed multiple of R^2",
     {"radius": 0.5, "centers": [0.0, 0.25, 0.5], "generator_factor": 0.5, "bridge": True},
     {"generator_factor": 1.0}, _m_near_occupation, _j_near_occupation, 3),
    _exp("doubling", "the domain Green measure of a ball is at most a fixed multiple of that of the half ball",
     {"n_placements": 10, "radius_range": [0.1, 0.25], "placement_seed": 3, "kernel_exponent_shift": 0, "bridge": True},
     {"kernel_exponent_shift": 1}, _m_doubling, _j_doubling, 3, n_paths=50000),
    _exp("a_infty", "the domain Green measure of a subset is at least a power of its relative volume",
     {"ball_center": None, "ball_radius": 0.4, "gammas": [0.05, 0.1, 0.2, 0.4, 0.8], "cell": 0.05, "alpha": 1.0,
      "wrong_exponent": False},
     {"wrong_exponent": True}, _m_a_infty, _j_a_infty, 3),
    _exp("exit_tail", "the exit-time survival function from B_R decays exponentially at rate of order R^-2",
     {"radius": 1.0, "t_min": 0.5, "t_max": 2.5, "n_times": 9, "generator_factor": 0.5, "bridge": True},
     {"generator_factor": 1.0}, _m_exit_tail, _j_exit_tail, dt=1e-4, n_paths=100000),
    _exp("support", "the probability of being in B_rho(y) at time t before exit is at least a power of rho",
     {"time": 0.25, "target": [0.3, 0.0, 0.0], "radii": [0.025, 0.05, 0.1, 0.2], "domain_radius": 1.0,
      "exponent_ref": None, "bridge": True},
     {"exponent_ref": 1.0}, _m_support, _j_support, n_paths=50000),
    _exp("nonexistence", "the critical inward drift makes the drift integral diverge as the truncation is removed",
     {"dts": [1e-2, 1e-3, 1e-4], "horizon": 1.0, "contrast": {"kind": "radial_ld_member", "params": {}},
      "swap_roles": False},
     {"swap_roles": True}, _m_nonexistence, _j_nonexistence),
    _exp("inkspots", "the union of dense balls is larger than the set by a fixed factor",
     {"zeta": 0.5, "m": 256, "dim": 2, "n_sets": 20, "fixture_seed": 7, "min_ball_cells": 2, "kappa": 0.5,
      "zeta_ratio": 0.8},
     {"zeta_ratio": 1.25}, _m_inkspots, _j_inkspots),
]
REGISTRY = {e.kind: e for e in _KINDS}


# ---------------------------------------------------------------------------
# running


def default_config(kind, **overrides):
    """Brownian-motion configuration for ``kind`` with its protocol defaults (path count, step size, dimension)."""
    from ..config import ExperimentConfig, FieldSpec, SimBlock

    if kind not in REGISTRY:
        raise RegistryError(f"unknown experiment kind {kind!r}")
    spec = REGISTRY[kind]
    drift = FieldSpec("example_1_1") if kind == "nonexistence" else FieldSpec("zero")
    sim_kw = dict(dt=1e-3, horizon=5.0, n_paths=10000, start_point=tuple([0.0] * spec.start_dim))
    sim_kw.update(spec.sim)
    sim = SimBlock(**sim_kw)
    kw = dict(kind=kind, seed=1, drift=drift, sim=sim)
    kw.update(overrides)
    return ExperimentConfig(**kw)


def run_experiment(kind, config=None):
    """Execute the protocol of ``kind`` and return an :class:`ExperimentReport`.

    ``config`` is an :class:`~ldrift.config.ExperimentConfig` (its ``kind``
    must match) or ``None`` for :func:`default_config`.
    """
    if kind not in REGISTRY:
        raise RegistryError(f"unknown experiment kind {kind!r}")
    spec = REGISTRY[kind]
    cfg = default_config(kind) if config is None else config
    if cfg.kind != kind:
        raise RegistryError(f"config is for kind {cfg.kind!r}, not {kind!r}")
    unknown = set(cfg.analysis) - set(spec.defaults)
    if unknown:
        raise RegistryError(f"unknown analysis keys for {kind}: {sorted(unknown)}")
    thresholds = load_thresholds()
    tol = thresholds["kinds"][kind]
    t0 = time.perf_counter()
    ctx = _Context(cfg, spec)
    measured = spec.measure(ctx)
    checks = spec.judge(measured.est, tol, ctx.bm)
    params = {
        "analysis": ctx.a,
        "drift": {"kind": cfg.drift.kind, "params": cfg.drift.params},
        "diffusion": {"kind": cfg.diffusion.kind, "params": cfg.diffusion.params},
        "sim": {"dt": cfg.sim.dt, "horizon": cfg.sim.horizon, "n_paths": cfg.sim.n_paths, "start_point": list(cfg.sim.start_point)},
        "master_seed": cfg.seed,
        "tolerances": tol,
    }
    return ExperimentReport(
        kind=kind,
        anchor=spec.anchor,
        parameters=params,
        quantities=measured.quantities,
        fits=measured.fits,
        checks=checks,
        verdict=verdict_of(checks),
        runtime=time.perf_counter() - t0,
        seeds=ctx.seeds,
        negative_control=cfg.negative_control,
        thresholds_version=int(thresholds["version"]),
        green=measured.green,
    )
