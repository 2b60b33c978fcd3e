"""Set growth by dense balls on a grid.

A :class:`GridSet` is a set of cells of the uniform grid with ``m`` cells per
axis on ``[-R, R]^d`` (``d = 2`` or ``3``), restricted to cells whose centers
lie in the closed ball ``B_R``.  :func:`grow_set` returns the union of all
grid balls inside ``B_R`` in which the set has density at least ``zeta``.

Grid balls are centred at cell centres with integer radii ``r`` (in cells)
and contain the cells whose centres are at distance ``< r`` cells.  The
overlap ``|Gamma cap B|`` is first bracketed by axis-aligned boxes
inscribed in and circumscribed about the ball, read from a summed-area
table; only undecided balls are counted exactly from row prefix sums.
"""

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

__all__ = [
    "InkspotError",
    "GridSet",
    "GrowthResult",
    "grow_set",
    "iterate_growth",
    "growth_target",
    "iteration_cap",
    "discretization_constant",
    "fixture_suite",
]


class InkspotError(ValueError):
    pass


@dataclass(eq=False)
class GridSet:
    """Occupied cells of the ``m^d`` grid on ``[-R, R]^d`` inside ``B_R``."""

    dim: int
    radius: float
    m: int
    mask: np.ndarray

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InkspotError("grid sets are implemented for d = 2 and 3")
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (self.m,) * self.dim:
            raise InkspotError("mask shape does not match (m,) * d")
        if np.any(self.mask & ~self.ambient_mask()):
            raise InkspotError("occupied cells outside the discretized ambient ball")

    @property
    def h(self):
        return 2.0 * self.radius / self.m

    @property
    def cell_volume(self):
        return self.h**self.dim

    @property
    def count(self):
        return int(self.mask.sum())

    @property
    def measure(self):
        return self.count * self.cell_volume

    def ambient_mask(self):
        return ambient_mask(self.dim, self.m)

    @property
    def ambient_measure(self):
        return int(self.ambient_mask().sum()) * self.cell_volume

    def centers_axis(self):
        return -self.radius + (np.arange(self.m) + 0.5) * self.h

    def contains(self, points):
        p = np.atleast_2d(np.asarray(points, float))
        idx = np.floor((p + self.radius) / self.h).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < self.m), axis=1)
        out = np.zeros(p.shape[0], dtype=bool)
        out[ok] = self.mask[tuple(idx[ok].T)]
        return out

    @classmethod
    def from_predicate(cls, dim, radius, m, pred):
        """Cells whose centres satisfy ``pred(points)`` (and lie in ``B_R``)."""
        ax = -radius + (np.arange(m) + 0.5) * (2.0 * radius / m)
        mesh = np.meshgrid(*([ax] * dim), indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        mask = np.asarray(pred(pts), dtype=bool).reshape((m,) * dim) & ambient_mask(dim, m)
        return cls(dim, radius, m, mask)

    # -- text format -------------------------------------------------------
    def to_text(self):
        """Header ``d R m`` then one line per grid row of alternating run lengths, starting with a 0-run."""
        lines = ["# ldrift gridset v1", f"d {self.dim}", f"R {self.radius!r}", f"m {self.m}"]
        rows = self.mask.reshape(-1, self.m)
        for row in rows:
            change = np.flatnonzero(np.diff(row.astype(np.int8))) + 1
            bounds = np.concatenate([[0], change, [self.m]])
            runs = list(np.diff(bounds))
            if row[0]:
                runs = [0] + runs
            lines.append(" ".join(str(int(v)) for v in runs))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        try:
            head = dict(ln.split(None, 1) for ln in lines[:3])
            d, R, m = int(head["d"]), float(head["R"]), int(head["m"])
        except (KeyError, ValueError) as err:
            raise InkspotError(f"malformed grid set header: {err}") from err
        body = lines[3:]
        if len(body) != m ** (d - 1):
            raise InkspotError(f"expected {m ** (d - 1)} rows, found {len(body)}")
        rows = np.zeros((len(body), m), dtype=bool)
        for i, ln in enumerate(body):
            pos, val = 0, False
            for run in (int(v) for v in ln.split()):
                if run < 0 or pos + run > m:
                    raise InkspotError(f"row {i}: runs exceed the row length")
                rows[i, pos : pos + run] = val
                pos += run
                val = not val
            if pos != m:
                raise InkspotError(f"row {i}: runs sum to {pos}, expected {m}")
        return cls(d, R, m, rows.reshape((m,) * d))


def ambient_mask(dim, m):
    """Cells of the ``m^d`` grid whose centres lie in the closed unit-scaled ball."""
    c = np.arange(m) - (m - 1) / 2.0
    mesh = np.meshgrid(*([c] * dim), indexing="ij")
    r2 = sum(g * g for g in mesh)
    return r2 <= (m / 2.0) ** 2


# ---------------------------------------------------------------------------
# compiled ball scan


@nb.njit(cache=True)
def _isqrt_strict(s):
    """Largest integer ``k >= 0`` with ``k^2 < s`` for integer ``s > 0``; -1 if ``s <= 0``."""
    if s <= 0:
        return -1
    k = int(math.sqrt(s))
    while k * k >= s:
        k -= 1
    while (k + 1) * (k + 1) < s:
        k += 1
    return k


@nb.njit(cache=True)
def _scan_2d(mask, amb, zeta, r_min_cells, m):
    # row prefix sums and summed-area table
    P = np.zeros((m, m + 1), np.int64)
    for i in range(m):
        for j in range(m):
            P[i, j + 1] = P[i, j] + mask[i, j]
    S = np.zeros((m + 1, m + 1), np.int64)
    for i in range(m):
        for j in range(m):
            S[i + 1, j + 1] = S[i, j + 1] + S[i + 1, j] - S[i, j] + mask[i, j]
    rmax_all = m // 2
    W = np.full((rmax_all + 1, rmax_all + 1), -1, np.int64)
    N = np.zeros(rmax_all + 1, np.int64)
    for r in range(1, rmax_all + 1):
        for dy in range(r):
            W[r, dy] = _isqrt_strict(r * r - dy * dy)
            N[r] += (2 * W[r, dy] + 1) * (1 if dy == 0 else 2)
    best = np.zeros((m, m), np.int64)
    stats = np.zeros(3, np.int64)  # accepted by inner box, rejected by outer box, counted exactly
    half = m / 2.0
    for ci in range(m):
        for cj in range(m):
            if not amb[ci, cj]:
                continue
            x = ci - (m - 1) / 2.0
            y = cj - (m - 1) / 2.0
            # ball radius r (cells) fits in B_R iff |c| + r <= m / 2
            rfit = int(math.floor(half - math.sqrt(x * x + y * y) + 1e-9))
            for r in range(1, min(rfit, rmax_all) + 1):
                if N[r] < r_min_cells:
                    continue
                need = zeta * N[r]
                # circumscribed box |dx|, |dy| <= r - 1
                a = r - 1
                outer = S[ci + a + 1, cj + a + 1] - S[ci - a, cj + a + 1] - S[ci + a + 1, cj - a] + S[ci - a, cj - a]
                if outer < need:
                    stats[1] += 1
                    continue
                # inscribed box: largest b with 2 b^2 < r^2
                b = _isqrt_strict((r * r + 1) // 2) if r > 1 else 0
                while 2 * b * b >= r * r and b > 0:
                    b -= 1
                inner = S[ci + b + 1, cj + b + 1] - S[ci - b, cj + b + 1] - S[ci + b + 1, cj - b] + S[ci - b, cj - b]
                if inner >= need:
                    stats[0] += 1
                    best[ci, cj] = r
                    continue
                stats[2] += 1
                cnt = 0
                for dy in range(-(r - 1), r):
                    w = W[r, abs(dy)]
                    cnt += P[ci + dy, cj + w + 1] - P[ci + dy, cj - w]
                if cnt >= need:
                    best[ci, cj] = r
    return best, stats, N


@nb.njit(cache=True)
def _scan_3d(mask, amb, zeta, r_min_cells, m):
    P = np.zeros((m, m, m + 1), np.int64)
    for i in range(m):
        for j in range(m):
            for k in range(m):
                P[i, j, k + 1] = P[i, j, k] + mask[i, j, k]
    S = np.zeros((m + 1, m + 1, m + 1), np.int64)
    for i in range(m):
        for j in range(m):
            for k in range(m):
                S[i + 1, j + 1, k + 1] = (
                    mask[i, j, k]
                    + S[i, j + 1, k + 1] + S[i + 1, j, k + 1] + S[i + 1, j + 1, k]
                    - S[i, j, k + 1] - S[i, j + 1, k] - S[i + 1, j, k]
                    + S[i, j, k]
                )  # fmt: skip
    rmax_all = m // 2
    N = np.zeros(rmax_all + 1, np.int64)
    for r in range(1, rmax_all + 1):
        for dy in range(-(r - 1), r):
            for dz in range(-(r - 1), r):
                w = _isqrt_strict(r * r - dy * dy - dz * dz)
                if w >= 0:
                    N[r] += 2 * w + 1
    best = np.zeros((m, m, m), np.int64)
    stats = np.zeros(3, np.int64)
    half = m / 2.0
    for ci in range(m):
        for cj in range(m):
            for ck in range(m):
                if not amb[ci, cj, ck]:
                    continue
                x = ci - (m - 1) / 2.0
                y = cj - (m - 1) / 2.0
                z = ck - (m - 1) / 2.0
                rfit = int(math.floor(half - math.sqrt(x * x + y * y + z * z) + 1e-9))
                for r in range(1, min(rfit, rmax_all) + 1):
                    if N[r] < r_min_cells:
                        continue
                    need = zeta * N[r]
                    a = r - 1
                    outer = _box3(S, ci - a, ci + a, cj - a, cj + a, ck - a, ck + a)
                    if outer < need:
                        stats[1] += 1
                        continue
                    b = 0
                    while 3 * (b + 1) * (b + 1) < r * r:
                        b += 1
                    inner = _box3(S, ci - b, ci + b, cj - b, cj + b, ck - b, ck + b)
                    if inner >= need:
                        stats[0] += 1
                        best[ci, cj, ck] = r
                        continue
                    stats[2] += 1
                    cnt = 0
                    for dy in range(-(r - 1), r):
                        for dz in range(-(r - 1), r):
                            w = _isqrt_strict(r * r - dy * dy - dz * dz)
                            if w >= 0:
                                cnt += P[ci + dy, cj + dz, ck + w + 1] - P[ci + dy, cj + dz, ck - w]
                    if cnt >= need:
                        best[ci, cj, ck] = r
    return best, stats, N


@nb.njit(cache=True)
def _box3(S, i0, i1, j0, j1, k0, k1):
    i1 += 1
    j1 += 1
    k1 += 1
    return (
        S[i1, j1, k1] - S[i0, j1, k1] - S[i1, j0, k1] - S[i1, j1, k0]
        + S[i0, j0, k1] + S[i0, j1, k0] + S[i1, j0, k0] - S[i0, j0, k0]
    )  # fmt: skip


@nb.njit(cache=True)
def _paint_2d(best, scale, m):
    """Union of balls of radius ``scale * best`` (cells at distance < radius), via row difference arrays."""
    diff = np.zeros((m, m + 1), np.int64)
    for ci in range(m):
        for cj in range(m):
            r = best[ci, cj]
            if r == 0:
                continue
            rr = scale * r
            rr2 = rr * rr
            span = int(math.ceil(rr))
            for dy in range(-span, span + 1):
                s = rr2 - dy * dy
                if s <= 0:
                    continue
                w = int(math.sqrt(s))
                if w * w >= s:
                    w -= 1
                if w < 0:
                    continue
                i = ci + dy
                if i < 0 or i >= m:
                    continue
                lo = max(cj - w, 0)
                hi = min(cj + w + 1, m)
                diff[i, lo] += 1
                diff[i, hi] -= 1
    out = np.zeros((m, m), np.bool_)
    for i in range(m):
        acc = 0
        for j in range(m):
            acc += diff[i, j]
            out[i, j] = acc > 0
    return out


@nb.njit(cache=True)
def _paint_3d(best, scale, m):
    diff = np.zeros((m, m, m + 1), np.int64)
    for ci in range(m):
        for cj in range(m):
            for ck in range(m):
                r = best[ci, cj, ck]
                if r == 0:
                    continue
                rr = scale * r
                rr2 = rr * rr
                span = int(math.ceil(rr))
                for dy in range(-span, span + 1):
                    for dz in range(-span, span + 1):
                        s = rr2 - dy * dy - dz * dz
                        if s <= 0:
                            continue
                        w = int(math.sqrt(s))
                        if w * w >= s:
                            w -= 1
                        if w < 0:
                            continue
                        i = ci + dy
                        j = cj + dz
                        if i < 0 or i >= m or j < 0 or j >= m:
                            continue
                        diff[i, j, max(ck - w, 0)] += 1
                        diff[i, j, min(ck + w + 1, m)] -= 1
    out = np.zeros((m, m, m), np.bool_)
    for i in range(m):
        for j in range(m):
            acc = 0
            for k in range(m):
                acc += diff[i, j, k]
                out[i, j, k] = acc > 0
    return out


# ---------------------------------------------------------------------------
# public operations


def growth_target(d, zeta):
    """Lower bound ``1 + (1 - zeta) / 3^d`` for the growth factor."""
    return 1.0 + (1.0 - zeta) / 3.0**d


@dataclass(eq=False)
class GrowthResult:
    """Output of :func:`grow_set`.

    ``grown`` is the union of admitted balls, ``shrunk`` the union of the
    same balls scaled by ``kappa``.  ``box_accepts`` / ``box_rejects`` count
    balls decided by the inscribed / circumscribed box bounds and
    ``exact_counts`` those needing an exact count.
    """

    grown: GridSet
    shrunk: GridSet
    growth_factor: float
    shrunk_factor: float
    kappa: float
    admitted_radius: np.ndarray
    box_accepts: int
    box_rejects: int
    exact_counts: int
    lost_cells: int

    @property
    def theta_hat(self):
        return self.growth_factor


def grow_set(gamma, zeta, min_ball_cells=2, kappa=0.5):
    """Union of grid balls ``B`` inside ``B_R`` with ``|Gamma cap B| >= zeta |B|``.

    Parameters
    ----------
    gamma : GridSet
    zeta : float in (0, 1)
    min_ball_cells : int, at least 2
        Smallest admissible ball size in cells.
    kappa : float in (0, 1)
        Shrink factor for the emitted union of shrunken balls.
    """
    if not 0.0 < zeta < 1.0:
        raise InkspotError("zeta must lie in (0, 1)")
    if not 0.0 < kappa < 1.0:
        raise InkspotError("kappa must lie in (0, 1)")
    if int(min_ball_cells) < 2:
        raise InkspotError("min_ball_cells must be at least 2")
    if gamma.count == 0:
        raise InkspotError("empty set")
    amb = gamma.ambient_mask()
    if gamma.count >= zeta * amb.sum():
        raise InkspotError("set measure must be below zeta times the ambient ball")
    mask = gamma.mask.astype(np.int64)
    scan = _scan_2d if gamma.dim == 2 else _scan_3d
    paint = _paint_2d if gamma.dim == 2 else _paint_3d
    best, stats, _ = scan(mask, amb, float(zeta), int(min_ball_cells), gamma.m)
    grown = paint(best, 1.0, gamma.m) & amb
    shrunk = paint(best, float(kappa), gamma.m) & amb
    g = GridSet(gamma.dim, gamma.radius, gamma.m, grown)
    s = GridSet(gamma.dim, gamma.radius, gamma.m, shrunk)
    return GrowthResult(
        g,
        s,
        g.count / gamma.count,
        s.count / gamma.count,
        float(kappa),
        best,
        int(stats[0]),
        int(stats[1]),
        int(stats[2]),
        int(np.sum(gamma.mask & ~grown)),
    )


def iteration_cap(d, zeta, gamma_measure, ambient_measure):
    """``ceil(log(zeta |B_R| / |Gamma|) / log(1 + (1 - zeta) / 3^d)) + 1``."""
    return int(math.ceil(math.log(zeta * ambient_measure / gamma_measure) / math.log(growth_target(d, zeta)))) + 1


def iterate_growth(gamma, zeta, min_ball_cells=2, max_iter=1000):
    """Apply :func:`grow_set` until the measure reaches ``zeta |B_R|``.

    Returns the list of measures (in cells) and whether the loop stopped
    because growth stalled rather than because the precondition failed.
    """
    sizes = [gamma.count]
    cur = gamma
    limit = zeta * cur.ambient_mask().sum()
    for _ in range(max_iter):
        if cur.count >= limit:
            return sizes, False
        res = grow_set(cur, zeta, min_ball_cells)
        if res.grown.count <= cur.count:
            return sizes, True
        cur = res.grown
        sizes.append(cur.count)
    return sizes, True


def discretization_constant(factors, target, m):
    """Smallest ``C >= 0`` with ``factor >= target (1 - C / m)`` for all factors."""
    f = np.asarray(factors, float)
    return float(max(0.0, np.max(m * (1.0 - f / target))))


def fixture_suite(m=256, n_sets=20, seed=7, d=2, max_fraction=0.45):
    """Reproducible family of test sets: unions of discs, squares and annular arcs.

    Each set has measure between 0.5% and ``max_fraction`` of the ambient ball.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n_sets:
        kind = len(out) % 4
        k = int(rng.integers(1, 6))
        cs = rng.uniform(-0.7, 0.7, size=(k, d))
        rs = rng.uniform(0.04, 0.3, size=k)

        def pred(p, cs=cs, rs=rs, kind=kind):
            hit = np.zeros(p.shape[0], bool)
            for c, r in zip(cs, rs):
                z = p - c
                if kind == 0:
                    hit |= np.sum(z * z, axis=1) <= r * r
                elif kind == 1:
                    hit |= np.max(np.abs(z), axis=1) <= r
                elif kind == 2:
                    rr = np.sqrt(np.sum(z * z, axis=1))
                    hit |= (rr <= r) & (rr >= 0.5 * r)
                else:
                    hit |= (np.sum(z * z, axis=1) <= r * r) | (np.max(np.abs(z), axis=1) <= 0.6 * r)
            return hit

        g = GridSet.from_predicate(d, 1.0, m, pred)
        frac = g.count / g.ambient_mask().sum()
        if 0.005 <= frac <= max_fraction:
            out.append(g)
    return out
