"""Fused compiled walker for large ensembles.

One kernel call advances a contiguous range of paths through the
Euler-Maruyama recursion and reduces everything the experiments need on the
fly (exit and hitting steps, weighted occupations, discounted histograms,
checkpoints), so no trajectory is ever stored.  Paths are processed in fixed
chunks of :data:`CHUNK` indices; chunk results are merged in chunk order,
which makes every output independent of the number of worker threads.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba as nb
import numpy as np

from .fields import drift_kernel, sigma_apply
from .rng import BRIDGE_BLOCK, KILL_BLOCK, step_gaussians, uniform_pair

CHUNK = 4096

CENSORED, EXITED, HIT, KILLED, ABORTED = 0, 1, 2, 3, 4
STATUS_NAMES = {CENSORED: "censored", EXITED: "exited", HIT: "hit", KILLED: "killed", ABORTED: "aborted"}

REGION_NONE, REGION_BALL, REGION_CYLINDER, REGION_HALFSPACE = 0, 1, 2, 3
DISCOUNT_NONE, DISCOUNT_WEIGHT, DISCOUNT_KILL = 0, 1, 2

# crossing probabilities below exp(-_BRIDGE_CUT) are treated as zero
_BRIDGE_CUT = 30.0


def worker_count():
    """Number of worker threads (``LDRIFT_WORKERS`` overrides the CPU count)."""
    env = os.environ.get("LDRIFT_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


@nb.njit(cache=True, nogil=True)
def _normal_variance(scode, sprm, sscale, x, n, tmp):
    # n' a(x) n = |sigma(x) n|^2 for symmetric sigma
    sigma_apply(scode, sprm, sscale, x, n, tmp)
    v = 0.0
    for i in range(x.shape[0]):
        v += tmp[i] * tmp[i]
    return v


@nb.njit(cache=True, nogil=True)
def _ball_gap(x, prm):
    """Signed distance to the sphere |x - c| = r (positive outside) and the outward normal."""
    d = x.shape[0]
    r2 = 0.0
    for i in range(d):
        r2 += (x[i] - prm[i]) ** 2
    return np.sqrt(r2) - prm[d]


@nb.njit(cache=True, nogil=True)
def _inside(kind, prm, x):
    """Closed-region membership."""
    d = x.shape[0]
    if kind == 1:
        return _ball_gap(x, prm) <= 0.0
    if kind == 2:
        # cylinder (0, L) x {|x'| < R}, prm = (L, R)
        if x[0] < 0.0 or x[0] > prm[0]:
            return False
        s = 0.0
        for i in range(1, d):
            s += x[i] * x[i]
        return s <= prm[1] * prm[1]
    if kind == 3:
        # halfspace {n . x >= c}, prm = (n, c)
        s = 0.0
        for i in range(d):
            s += prm[i] * x[i]
        return s >= prm[d]
    return True


@nb.njit(cache=True, nogil=True)
def _gap(kind, prm, x):
    """Signed distance-like gap: positive outside the closed region, at most the distance to it."""
    d = x.shape[0]
    if kind == 1:
        return _ball_gap(x, prm)
    if kind == 2:
        s = 0.0
        for i in range(1, d):
            s += x[i] * x[i]
        return max(max(-x[0], x[0] - prm[0]), np.sqrt(s) - prm[1])
    if kind == 3:
        s = 0.0
        for i in range(d):
            s += prm[i] * x[i]
        return prm[d] - s
    return -np.inf


@nb.njit(cache=True, nogil=True)
def _bridge_log_survival(kind, prm, xa, xb, outside_target, scode, sprm, sscale, dt, vmax, nrm, tmp):
    """Log-probability that a Brownian bridge from xa to xb does not cross the region boundary.

    Both endpoints lie on the same side of every face; each face is treated
    as locally flat with the diffusion variance normal to it frozen at xa.
    """
    d = xa.shape[0]
    acc = 0.0
    if kind == 1:
        ga = _ball_gap(xa, prm)
        gb = _ball_gap(xb, prm)
        if not outside_target:
            ga = -ga
            gb = -gb
        if ga * gb < _BRIDGE_CUT * 0.5 * vmax * dt and ga > 0.0 and gb > 0.0:
            r = ga + prm[d] if outside_target else prm[d] - ga
            r = max(r, 1e-300)
            for i in range(d):
                nrm[i] = (xa[i] - prm[i]) / r
            v = _normal_variance(scode, sprm, sscale, xa, nrm, tmp)
            acc += math.log1p(-math.exp(-2.0 * ga * gb / (v * dt)))
        return acc
    if kind == 3:
        sa = -prm[d]
        sb = -prm[d]
        for i in range(d):
            sa += prm[i] * xa[i]
            sb += prm[i] * xb[i]
        if outside_target:
            sa = -sa
            sb = -sb
        if sa * sb < _BRIDGE_CUT * 0.5 * vmax * dt and sa > 0.0 and sb > 0.0:
            for i in range(d):
                nrm[i] = prm[i]
            v = _normal_variance(scode, sprm, sscale, xa, nrm, tmp)
            acc += math.log1p(-math.exp(-2.0 * sa * sb / (v * dt)))
        return acc
    if kind == 2 and not outside_target:
        # far and near end caps
        for face in range(2):
            if face == 0:
                ga = xa[0]
                gb = xb[0]
            else:
                ga = prm[0] - xa[0]
                gb = prm[0] - xb[0]
            if ga * gb < _BRIDGE_CUT * 0.5 * vmax * dt and ga > 0.0 and gb > 0.0:
                for i in range(d):
                    nrm[i] = 0.0
                nrm[0] = 1.0
                v = _normal_variance(scode, sprm, sscale, xa, nrm, tmp)
                acc += math.log1p(-math.exp(-2.0 * ga * gb / (v * dt)))
        # side wall
        ra = 0.0
        rb = 0.0
        for i in range(1, d):
            ra += xa[i] * xa[i]
            rb += xb[i] * xb[i]
        ra = np.sqrt(ra)
        rb = np.sqrt(rb)
        ga = prm[1] - ra
        gb = prm[1] - rb
        if ga * gb < _BRIDGE_CUT * 0.5 * vmax * dt and ga > 0.0 and gb > 0.0 and ra > 0.0:
            nrm[0] = 0.0
            for i in range(1, d):
                nrm[i] = xa[i] / ra
            v = _normal_variance(scode, sprm, sscale, xa, nrm, tmp)
            acc += math.log1p(-math.exp(-2.0 * ga * gb / (v * dt)))
    return acc


@nb.njit(cache=True, nogil=True)
def _cell_index(x, lo, h, n):
    d = x.shape[0]
    # cheap box test first; points well outside never reach the division
    span = n * h * (1.0 + 1e-9)
    for i in range(d):
        t = x[i] - lo[i]
        if t < 0.0 or t > span:
            return -1
    idx = 0
    for i in range(d):
        c = int(math.floor((x[i] - lo[i]) / h))
        if c < 0 or c >= n:
            return -1
        idx = idx * n + c
    return idx


@nb.njit(cache=True, nogil=True)
def walk_kernel(
    x0,
    dcode,
    dprm,
    dscale,
    dcap,
    scode,
    sprm,
    sscale,
    vmax,
    dt,
    n_steps,
    seed,
    p0,
    p1,
    stop_kind,
    stop_prm,
    tgt_kind,
    tgt_prm,
    stop_on_hit,
    bridge,
    occ_c,
    occ_r,
    disc_mode,
    lam,
    clock_r,
    ckpt,
    g_lo,
    g_h,
    g_n,
    g_off,
    status,
    end_step,
    end_pos,
    hit_step,
    occ,
    disc_time,
    drift_int,
    max_disp,
    ck_pos,
    h_sum,
    h_sq,
    buf,
    touched,
):
    d = x0.shape[0]
    n_occ = occ_r.shape[0]
    n_ck = ckpt.shape[0]
    n_g = g_h.shape[0]
    x = np.empty(d)
    y = np.empty(d)
    b = np.empty(d)
    xi = np.empty(d)
    sx = np.empty(d)
    tmp = np.empty(d)
    nrm = np.empty(d)
    for i in range(d):
        b[i] = 0.0
    sqdt = math.sqrt(dt)
    bcut = _BRIDGE_CUT * 0.5 * vmax * dt
    clock_r2 = clock_r * clock_r
    w_disc = (1.0 - math.exp(-lam * dt)) / lam if lam > 0.0 else dt
    for p in range(p0, p1):
        j = p - p0
        for i in range(d):
            x[i] = x0[i]
        st = CENSORED
        end = n_steps
        hs = -1
        hz = 0.0
        life = np.inf
        if disc_mode == DISCOUNT_KILL:
            u, _ = uniform_pair(seed, p, 0, KILL_BLOCK)
            life = -math.log1p(-u)
        dint = 0.0
        dtime = 0.0
        mdisp = 0.0
        n_t = 0
        ci = 0
        gt_prev = _gap(tgt_kind, tgt_prm, x)
        gs_prev = _gap(stop_kind, stop_prm, x)
        if tgt_kind != REGION_NONE and gt_prev <= 0.0:
            hs = 0
            if stop_on_hit:
                st = HIT
                end = 0
        for k in range(n_steps + 1):
            while ci < n_ck and ckpt[ci] == k:
                for i in range(d):
                    ck_pos[j, ci, i] = x[i]
                ci += 1
            if st != CENSORED or k == n_steps:
                break
            if disc_mode == DISCOUNT_KILL and hz >= life:
                st = KILLED
                end = k
                break
            # local clock: discounting only outside the clock ball
            w = dt
            if lam > 0.0:
                lam_on = True
                if clock_r2 > 0.0:
                    r2 = 0.0
                    for i in range(d):
                        r2 += x[i] * x[i]
                    lam_on = r2 >= clock_r2
                if lam_on:
                    if disc_mode == DISCOUNT_WEIGHT:
                        w = math.exp(-hz) * w_disc
                    elif disc_mode == DISCOUNT_KILL:
                        w = w_disc
                    hz += lam * dt
            dtime += w
            for m in range(n_occ):
                s = 0.0
                for i in range(d):
                    s += (x[i] - occ_c[m, i]) ** 2
                if s <= occ_r[m] * occ_r[m]:
                    occ[j, m] += w
            for g in range(n_g):
                c = _cell_index(x, g_lo[g], g_h[g], g_n[g])
                if c >= 0:
                    c += g_off[g]
                    if buf[c] == 0.0:
                        touched[n_t] = c
                        n_t += 1
                    buf[c] += w
            if dcode != 0:
                dint += drift_kernel(dcode, dprm, dscale, dcap, x, tmp, b) * dt
            step_gaussians(seed, p, k, xi)
            if scode == 0:
                for i in range(d):
                    sx[i] = xi[i]
            else:
                sigma_apply(scode, sprm, sscale, x, xi, sx)
            disp2 = 0.0
            for i in range(d):
                y[i] = x[i] + b[i] * dt + sx[i] * sqdt
                disp2 += (y[i] - x[i]) ** 2
            if not math.isfinite(disp2):
                st = ABORTED
                end = k + 1
                for i in range(d):
                    x[i] = y[i]
                break
            if disp2 > mdisp:
                mdisp = disp2
            if hs < 0 and tgt_kind != REGION_NONE:
                gt = _gap(tgt_kind, tgt_prm, y)
                hit = gt <= 0.0
                if not hit and bridge and gt * gt_prev < bcut:
                    ls = _bridge_log_survival(tgt_kind, tgt_prm, x, y, True, scode, sprm, sscale, dt, vmax, nrm, tmp)
                    if ls < 0.0:
                        ub, _ = uniform_pair(seed, p, k, BRIDGE_BLOCK)
                        hit = ub < -math.expm1(ls)
                gt_prev = gt
                if hit:
                    hs = k + 1
                    if stop_on_hit:
                        st = HIT
                        end = k + 1
            if st == CENSORED and stop_kind != REGION_NONE:
                gs = _gap(stop_kind, stop_prm, y)
                out = gs > 0.0
                if not out and bridge and gs * gs_prev < bcut:
                    ls = _bridge_log_survival(stop_kind, stop_prm, x, y, False, scode, sprm, sscale, dt, vmax, nrm, tmp)
                    if ls < 0.0:
                        _, ub2 = uniform_pair(seed, p, k, BRIDGE_BLOCK)
                        out = ub2 < -math.expm1(ls)
                gs_prev = gs
                if out:
                    st = EXITED
                    end = k + 1
            for i in range(d):
                x[i] = y[i]
        status[j] = st
        end_step[j] = end
        hit_step[j] = hs
        disc_time[j] = dtime
        drift_int[j] = dint
        max_disp[j] = math.sqrt(mdisp)
        for i in range(d):
            end_pos[j, i] = x[i]
        for t in range(n_t):
            c = touched[t]
            v = buf[c]
            h_sum[c] += v
            h_sq[c] += v * v
            buf[c] = 0.0


# ---------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class HistGrid:
    """Uniform cubic grid ``lo + h * [0, n)^d`` for occupation histograms."""

    lo: Sequence[float]
    h: float
    n: int

    def centers(self):
        d = len(self.lo)
        ax = np.asarray(self.lo, float)[:, None] + (np.arange(self.n) + 0.5)[None, :] * self.h
        mesh = np.meshgrid(*[ax[i] for i in range(d)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class WalkSpec:
    """Everything the fused walker needs besides the fields."""

    x0: Sequence[float]
    dt: float
    n_steps: int
    n_paths: int
    seed: int
    stop: tuple = (REGION_NONE, ())
    target: tuple = (REGION_NONE, ())
    stop_on_hit: bool = False
    bridge: bool = False
    occupation_balls: Sequence = ()
    discount: int = DISCOUNT_NONE
    lam: float = 0.0
    clock_radius: float = 0.0
    checkpoints: Sequence[int] = ()
    grids: Sequence[HistGrid] = ()


@dataclass
class WalkResult:
    spec: WalkSpec
    status: np.ndarray
    end_step: np.ndarray
    end_pos: np.ndarray
    hit_step: np.ndarray
    occupation: np.ndarray
    discounted_time: np.ndarray
    drift_integral: np.ndarray
    max_step: np.ndarray
    checkpoints: np.ndarray
    hist_sum: list = field(default_factory=list)
    hist_sq: list = field(default_factory=list)

    @property
    def n_paths(self):
        return self.status.shape[0]

    def count(self, code):
        return int(np.sum(self.status == code))


def _region_arrays(region, d):
    kind, prm = region
    return int(kind), np.asarray(prm, dtype=np.float64).reshape(-1) if len(prm) else np.zeros(1)


def run_walk(spec, drift, diffusion, workers=None):
    """Run the fused walker over ``spec.n_paths`` paths; returns a :class:`WalkResult`."""
    if not (drift.compiled and diffusion.compiled):
        raise TypeError("the fused walker needs built-in drift and diffusion kinds")
    d = drift.dim
    x0 = np.asarray(spec.x0, dtype=np.float64).reshape(d)
    n = int(spec.n_paths)
    n_steps = int(spec.n_steps)
    stop_kind, stop_prm = _region_arrays(spec.stop, d)
    tgt_kind, tgt_prm = _region_arrays(spec.target, d)
    if spec.occupation_balls:
        occ_c = np.asarray([c for c, _ in spec.occupation_balls], dtype=np.float64).reshape(-1, d)
        occ_r = np.asarray([r for _, r in spec.occupation_balls], dtype=np.float64)
    else:
        occ_c = np.zeros((0, d))
        occ_r = np.zeros(0)
    ckpt = np.asarray(sorted(spec.checkpoints), dtype=np.int64)
    grids = list(spec.grids)
    g_lo = np.asarray([g.lo for g in grids], dtype=np.float64).reshape(-1, d)
    g_h = np.asarray([g.h for g in grids], dtype=np.float64)
    g_n = np.asarray([g.n for g in grids], dtype=np.int64)
    sizes = [g.n**d for g in grids]
    g_off = np.asarray(np.cumsum([0] + sizes)[:-1], dtype=np.int64)
    total = int(sum(sizes))

    status = np.empty(n, np.int8)
    end_step = np.empty(n, np.int64)
    end_pos = np.empty((n, d))
    hit_step = np.empty(n, np.int64)
    occ = np.zeros((n, len(occ_r)))
    disc_time = np.empty(n)
    drift_int = np.empty(n)
    max_disp = np.empty(n)
    ck_pos = np.full((n, len(ckpt), d), np.nan)
    h_sum = np.zeros(total)
    h_sq = np.zeros(total)

    dprm, sprm = drift.param_array, diffusion.param_array
    vmax = 1.0 / diffusion.delta
    seed = np.uint64(spec.seed)

    def job(c):
        a = c * CHUNK
        bnd = min(n, a + CHUNK)
        ps = np.zeros(total)
        pq = np.zeros(total)
        buf = np.zeros(max(total, 1))
        touched = np.empty(max(total, 1), np.int64)
        sl = slice(a, bnd)
        walk_kernel(
            x0, drift.code, dprm, float(drift.scale), float(drift.cap),
            diffusion.code, sprm, float(diffusion.scale), vmax,
            float(spec.dt), n_steps, seed, a, bnd,
            stop_kind, stop_prm, tgt_kind, tgt_prm, bool(spec.stop_on_hit), bool(spec.bridge),
            occ_c, occ_r, int(spec.discount), float(spec.lam), float(spec.clock_radius), ckpt,
            g_lo, g_h, g_n, g_off,
            status[sl], end_step[sl], end_pos[sl], hit_step[sl], occ[sl], disc_time[sl],
            drift_int[sl], max_disp[sl], ck_pos[sl], ps, pq, buf, touched,
        )  # fmt: skip
        return ps, pq

    n_chunks = (n + CHUNK - 1) // CHUNK
    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1 or n_chunks == 1:
        for c in range(n_chunks):
            ps, pq = job(c)
            h_sum += ps
            h_sq += pq
    else:
        with ThreadPoolExecutor(workers) as pool:
            for start in range(0, n_chunks, workers):
                futs = [pool.submit(job, c) for c in range(start, min(n_chunks, start + workers))]
                for f in futs:  # chunk order, so sums are scheduling independent
                    ps, pq = f.result()
                    h_sum += ps
                    h_sq += pq
    hs, hq = [], []
    for off, size in zip(g_off, sizes):
        hs.append(h_sum[off : off + size].reshape((grids[len(hs)].n,) * d))
        hq.append(h_sq[off : off + size].reshape((grids[len(hq)].n,) * d))
    return WalkResult(
        spec, status, end_step, end_pos, hit_step, occ, disc_time, drift_int, max_disp, ck_pos, hs, hq
    )
