import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldrift.fields import make_diffusion_field, make_example_field
from ldrift.regions import Ball, Cylinder, EmptyRegion, Halfspace
from ldrift.simulate import Path, SimConfig, simulate_ensemble, simulate_path
from ldrift.stopping import (
    HistGrid,
    PreconditionError,
    first_exit,
    hitting_time,
    occupation,
    tube_crossing,
    walk_ensemble,
)
from ldrift.verify.oracles import bm_exit_moment, bm_hitting_prob

ZERO2 = make_example_field("zero", 2)
ID2 = make_diffusion_field("identity", 2)
ZERO3 = make_example_field("zero", 3)
ID3 = make_diffusion_field("identity", 3)


def line_path(direction, dt=0.01, horizon=3.0, start=None):
    """Deterministic path ``start + t * direction`` on a grid of step ``dt``."""
    v = np.asarray(direction, float)
    x0 = np.zeros_like(v) if start is None else np.asarray(start, float)
    t = np.arange(int(round(horizon / dt)) + 1) * dt
    return Path(t, x0 + t[:, None] * v, np.zeros((t.size - 1, v.size)), 0, 0)


def test_path_inside_is_censored():
    p = line_path([0.0, 0.0])
    rec = first_exit(p, Ball((0.0, 0.0), 1.0))
    assert rec.censored and math.isinf(rec.exit_time)


def test_linear_path_exits_unit_ball_at_one():
    p = line_path([1.0, 0.0])
    rec = first_exit(p, Ball((0.0, 0.0), 1.0))
    assert not rec.censored
    assert abs(rec.exit_time - 1.0) <= p.dt + 1e-12
    np.testing.assert_allclose(rec.exit_position, [1.0, 0.0], atol=p.dt + 1e-12)


def test_start_outside_is_precondition_error():
    with pytest.raises(PreconditionError):
        first_exit(line_path([1.0, 0.0], start=[2.0, 0.0]), Ball((0.0, 0.0), 1.0))


def test_hitting_time_examples():
    p = line_path([1.0, 0.0])
    assert hitting_time(p, Ball((0.0, 0.0), 0.1)) == 0.0
    assert math.isinf(hitting_time(p, Ball((0.0, 5.0), 0.5)))
    assert hitting_time(p, Halfspace((1.0, 0.0), 2.0)) == pytest.approx(2.0, abs=p.dt)


def test_occupation_examples():
    p = line_path([1.0, 0.0])
    b = Ball((0.0, 0.0), 1.0)
    rec = first_exit(p, b)
    assert occupation(p, b, rec) == pytest.approx(rec.exit_time)
    assert occupation(p, EmptyRegion(), rec) == 0.0
    assert occupation(p, Ball((0.0, 0.0), 0.5), rec) == pytest.approx(0.51, abs=1e-9)
    with pytest.raises(PreconditionError):
        occupation(p, b, 10.0)


@given(st.integers(0, 2**32), st.floats(0.3, 1.0), st.floats(0.05, 1.0))
def test_exit_monotone_and_occupation_bounded(seed, r, extra):
    cfg = SimConfig(dt=0.01, horizon=2.0, master_seed=seed)
    p = simulate_path(cfg, ZERO2, ID2, 0)
    small = first_exit(p, Ball((0.0, 0.0), r))
    big = first_exit(p, Ball((0.0, 0.0), r + extra))
    assert big.exit_time >= small.exit_time
    assert occupation(p, Ball((0.3, 0.0), 0.4), small) <= (p.times[-1] if small.censored else small.exit_time) + 1e-12


def test_exit_position_within_one_step_of_boundary():
    cfg = SimConfig(dt=0.01, horizon=3.0, n_paths=200, master_seed=5)
    b = Ball((0.0, 0.0), 1.0)
    for p in simulate_ensemble(cfg, ZERO2, ID2):
        rec = first_exit(p, b)
        if rec.censored:
            continue
        step = np.max(np.linalg.norm(np.diff(p.positions, axis=0), axis=1))
        assert 1.0 <= np.linalg.norm(rec.exit_position) <= 1.0 + step


def test_engine_agrees_with_path_functionals():
    b = make_example_field("example_1_1", 2)
    cfg = SimConfig(dt=0.005, horizon=1.0, n_paths=64, master_seed=13, start_point=(0.3, 0.1))
    dom = Ball((0.0, 0.0), 1.0)
    tgt = Ball((0.5, 0.0), 0.2)
    occ = Ball((0.0, 0.0), 0.5)
    res = walk_ensemble(cfg, b, ID2, domain=dom, target=tgt, occupation_sets=[occ])
    for p in simulate_ensemble(cfg, b, ID2):
        rec = first_exit(p, dom)
        i = p.index
        assert res.exit_times[i] == pytest.approx(rec.exit_time) if not rec.censored else res.censored[i]
        h = hitting_time(p, tgt)
        if h < (rec.exit_time if not rec.censored else math.inf):
            assert res.hit_times[i] == pytest.approx(h)
        assert res.occupation[i, 0] == pytest.approx(occupation(p, occ, rec), abs=1e-12)


def test_engine_independent_of_workers():
    cfg = SimConfig(dt=0.01, horizon=2.0, n_paths=3000, master_seed=21)
    a = walk_ensemble(cfg, ZERO2, ID2, domain=Ball((0.0, 0.0), 1.0), workers=1)
    b = walk_ensemble(cfg, ZERO2, ID2, domain=Ball((0.0, 0.0), 1.0), workers=3)
    np.testing.assert_array_equal(a.stop_times, b.stop_times)
    np.testing.assert_array_equal(a.end_positions, b.end_positions)


def test_brownian_mean_exit_time():
    cfg = SimConfig(dt=1e-3, horizon=5.0, n_paths=20000, master_seed=3)
    res = walk_ensemble(cfg, ZERO2, ID2, domain=Ball((0.0, 0.0), 1.0)).require_clean(1e-3)
    t = res.exit_times
    se = t.std(ddof=1) / math.sqrt(t.size)
    exact = bm_exit_moment(2, 1.0, 0.0)
    # grid detection overshoots by O(sqrt(dt))
    assert abs(t.mean() - exact) < 3 * se + 0.6 * math.sqrt(cfg.dt)


def test_bridge_correction_reduces_overshoot_bias():
    cfg = SimConfig(dt=1e-2, horizon=5.0, n_paths=20000, master_seed=4)
    dom = Ball((0.0, 0.0), 1.0)
    plain = walk_ensemble(cfg, ZERO2, ID2, domain=dom).exit_times.mean()
    bridged = walk_ensemble(cfg, ZERO2, ID2, domain=dom, bridge=True).exit_times.mean()
    assert abs(bridged - 0.5) < abs(plain - 0.5)


def test_brownian_hitting_probability():
    cfg = SimConfig(dt=1e-3, horizon=10.0, n_paths=20000, master_seed=17, start_point=(0.5, 0.0, 0.0))
    res = walk_ensemble(cfg, ZERO3, ID3, domain=Ball((0.0, 0.0, 0.0), 1.0), target=Ball((0.0, 0.0, 0.0), 0.25), stop_on_hit=True)
    hit = res.hit.astype(float)
    p = bm_hitting_prob(3, 0.25, 1.0, 0.5)
    assert p == pytest.approx(1 / 3)
    assert abs(hit.mean() - p) < 3 * hit.std(ddof=1) / math.sqrt(hit.size) + 0.02


def test_hit_before_exit_ordering():
    cfg = SimConfig(dt=1e-2, horizon=5.0, n_paths=500, master_seed=2, start_point=(0.5, 0.0))
    res = walk_ensemble(cfg, ZERO2, ID2, domain=Ball((0.0, 0.0), 1.0), target=Ball((0.0, 0.0), 0.25))
    h = res.hit
    assert np.all(res.hit_times[h] < res.exit_times[h])


def test_checkpoints_nan_after_stop():
    cfg = SimConfig(dt=0.01, horizon=2.0, n_paths=200, master_seed=2)
    res = walk_ensemble(cfg, ZERO2, ID2, domain=Ball((0.0, 0.0), 0.5), checkpoint_times=[0.1, 1.5])
    cp = res.checkpoints
    assert cp.shape[:2] == (200, 2)
    stopped = res.stop_times < 1.5
    assert np.all(np.isnan(cp[stopped, 1]))
    assert np.all(np.isfinite(cp[~stopped, 1]))


def test_histogram_mass_equals_occupation():
    cfg = SimConfig(dt=0.01, horizon=3.0, n_paths=300, master_seed=2)
    grid = HistGrid((-1.0, -1.0), 0.1, 20)
    res = walk_ensemble(cfg, ZERO2, ID2, domain=Ball((0.0, 0.0), 1.0), grids=[grid])
    s, _ = res.histogram(0)
    assert s.sum() == pytest.approx(res.stop_times.sum(), rel=1e-9)


def test_start_outside_domain_rejected():
    cfg = SimConfig(dt=0.01, horizon=1.0, start_point=(2.0, 0.0))
    with pytest.raises(PreconditionError):
        walk_ensemble(cfg, ZERO2, ID2, domain=Ball((0.0, 0.0), 1.0))


def test_tube_deterministic_axial_success():
    p = line_path([1.0, 0.0], start=[1.0, 0.0], horizon=5.0)
    out = tube_crossing(p, Cylinder(3, 1.0, 2), 0.5)
    assert out.kind == "success"
    assert abs(out.exit_time - 2.0) <= p.dt + 1e-12


def test_tube_deterministic_radial_side_failure():
    p = line_path([0.0, 1.0], start=[1.0, 0.0])
    assert tube_crossing(p, Cylinder(3, 1.0, 2), 0.5).kind == "side-failure"


def test_tube_back_failure_and_censored():
    assert tube_crossing(line_path([-1.0, 0.0], start=[1.0, 0.0]), Cylinder(3, 1.0, 2), 0.5).kind == "back-failure"
    assert tube_crossing(line_path([0.0, 0.0], start=[1.0, 0.0]), Cylinder(3, 1.0, 2), 0.5).kind == "censored"


def test_tube_precondition():
    with pytest.raises(PreconditionError):
        tube_crossing(line_path([1.0, 0.0], start=[1.0, 0.9]), Cylinder(3, 1.0, 2), 0.5)
    with pytest.raises(PreconditionError):
        tube_crossing(line_path([1.0, 0.0], start=[0.5, 0.0]), Cylinder(3, 1.0, 2), 0.5)
    with pytest.raises(PreconditionError):
        tube_crossing(line_path([1.0, 0.0], start=[1.0, 0.0]), Cylinder(3, 1.0, 2), 0.3)


def test_tube_success_probability_decreases_geometrically():
    probs = []
    for n in (2, 3, 4):
        cfg = SimConfig(dt=1e-3, horizon=30.0, n_paths=4000, master_seed=n, start_point=(1.0, 0.0))
        res = walk_ensemble(cfg, ZERO2, ID2, domain=Cylinder(n, 1.0, 2))
        probs.append(np.mean(res.tube_outcomes(0.5) == "success"))
    assert probs[0] > probs[1] > probs[2] > 0
