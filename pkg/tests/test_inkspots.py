import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldrift.inkspots import (
    GridSet,
    InkspotError,
    ambient_mask,
    discretization_constant,
    fixture_suite,
    grow_set,
    growth_target,
    iterate_growth,
    iteration_cap,
)


def brute_grow(gamma, zeta, min_cells, scale=1.0):
    """Direct enumeration of admitted grid balls and their (scaled) union."""
    m, d = gamma.m, gamma.dim
    amb = ambient_mask(d, m)
    idx = np.stack(np.meshgrid(*([np.arange(m)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    flat = gamma.mask.ravel()
    out = np.zeros(m**d, bool)
    for c in idx[amb.ravel()]:
        pos = c - (m - 1) / 2.0
        dist2 = np.sum((idx - c) ** 2, axis=1)
        best = 0
        for r in range(1, m // 2 + 1):
            if np.linalg.norm(pos) + r > m / 2.0 + 1e-9:
                break
            ball = dist2 < r * r
            n = int(ball.sum())
            if n >= min_cells and flat[ball].sum() >= zeta * n:
                best = r
        if best:
            out |= dist2 < (scale * best) ** 2
    return out.reshape((m,) * d) & amb


def random_set(rng, d, m, p):
    amb = ambient_mask(d, m)
    mask = (rng.random((m,) * d) < p) & amb
    if mask.sum() == 0:
        mask[(m // 2,) * d] = True
    return GridSet(d, 1.0, m, mask)


@pytest.mark.parametrize("d,m", [(2, 20), (2, 27), (3, 10)])
@pytest.mark.parametrize("zeta", [0.3, 0.5, 0.7])
def test_grow_matches_brute_force(d, m, zeta):
    rng = np.random.default_rng(m * 10 + int(10 * zeta))
    for p in (0.05, 0.15):
        g = random_set(rng, d, m, p)
        if g.count >= zeta * ambient_mask(d, m).sum():
            continue
        res = grow_set(g, zeta)
        np.testing.assert_array_equal(res.grown.mask, brute_grow(g, zeta, 2))
        np.testing.assert_array_equal(res.shrunk.mask, brute_grow(g, zeta, 2, 0.5))


def test_small_disc_growth_factor():
    target = growth_target(2, 0.5)
    assert target == pytest.approx(1 + 0.5 / 9)
    m = 256
    rad = math.sqrt(0.01)
    g = GridSet.from_predicate(2, 1.0, m, lambda p: np.sum(p * p, axis=1) <= rad * rad)
    res = grow_set(g, 0.5)
    assert res.growth_factor >= target * (1 - 4.0 / m)


def test_fine_checkerboard_fills_ambient_ball():
    m = 64
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    amb = ambient_mask(2, m)
    # minority colour minus one cell keeps the set strictly below zeta |B_R|
    colours = [((ii + jj) % 2 == k) & amb for k in (0, 1)]
    mask = min(colours, key=lambda c: c.sum()).copy()
    mask[tuple(np.argwhere(mask)[0])] = False
    g = GridSet(2, 1.0, m, mask)
    res = grow_set(g, 0.5)
    assert res.grown.count / amb.sum() > 0.95


def test_gamma_contained_in_growth_except_near_boundary():
    for g in fixture_suite(m=128, n_sets=6, seed=3):
        res = grow_set(g, 0.5)
        lost = g.mask & ~res.grown.mask
        if lost.any():
            c = np.argwhere(lost) - (g.m - 1) / 2.0
            assert np.all(np.linalg.norm(c, axis=1) >= g.m / 2.0 - 2.0)
        assert res.lost_cells == int(lost.sum())


@pytest.mark.parametrize("kappa", [0.5, 0.75])
def test_shrunk_union_bound(kappa):
    for g in fixture_suite(m=128, n_sets=6, seed=4):
        res = grow_set(g, 0.5, kappa=kappa)
        assert res.shrunk.count >= kappa**2 * g.count
        assert np.all(res.shrunk.mask <= res.grown.mask)


def test_preconditions():
    m = 32
    amb = ambient_mask(2, m)
    with pytest.raises(InkspotError):
        grow_set(GridSet(2, 1.0, m, amb), 0.5)
    with pytest.raises(InkspotError):
        grow_set(GridSet(2, 1.0, m, np.zeros((m, m), bool)), 0.5)
    small = GridSet(2, 1.0, m, np.zeros((m, m), bool))
    small.mask[16, 16] = True
    with pytest.raises(InkspotError):
        grow_set(small, 0.5, min_ball_cells=1)
    with pytest.raises(InkspotError):
        grow_set(small, 1.0)
    with pytest.raises(InkspotError):
        GridSet(2, 1.0, m, np.ones((m, m), bool))


@given(st.integers(0, 2**32 - 1), st.floats(0.2, 0.8), st.floats(0.2, 0.8))
def test_monotone_in_zeta(seed, z1, z2):
    lo, hi = sorted((z1, z2))
    g = random_set(np.random.default_rng(seed), 2, 24, 0.1)
    if g.count >= lo * ambient_mask(2, 24).sum():
        return
    a = grow_set(g, lo).grown.mask
    b = grow_set(g, hi).grown.mask
    assert np.all(b <= a)


@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.floats(0.0, 0.6))
def test_text_round_trip(seed, d, p):
    m = 12 if d == 3 else 30
    g = random_set(np.random.default_rng(seed), d, m, p)
    back = GridSet.from_text(g.to_text())
    assert back.dim == d and back.m == m and back.radius == g.radius
    np.testing.assert_array_equal(back.mask, g.mask)


def test_text_errors():
    g = fixture_suite(m=32, n_sets=1)[0]
    text = g.to_text()
    with pytest.raises(InkspotError):
        GridSet.from_text(text.replace("m 32", "m 31"))
    lines = text.splitlines()
    lines[-1] = "40"
    with pytest.raises(InkspotError):
        GridSet.from_text("\n".join(lines))


def test_iteration_cap_holds():
    zeta = 0.5
    for g in fixture_suite(m=64, n_sets=4, seed=5):
        sizes, stalled = iterate_growth(g, zeta)
        cap = iteration_cap(2, zeta, g.count, ambient_mask(2, 64).sum())
        assert len(sizes) - 1 <= cap


def test_discretization_constant():
    assert discretization_constant([1.2, 1.1], 1.05, 100) == 0.0
    assert discretization_constant([1.0], 1.05, 100) == pytest.approx(100 * (1 - 1 / 1.05))


def test_fixture_suite_is_reproducible():
    a = fixture_suite(m=64, n_sets=5, seed=1)
    b = fixture_suite(m=64, n_sets=5, seed=1)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.mask, y.mask)
