import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldrift.fields import (
    DivergentNormError,
    EllipticityError,
    FieldError,
    SingularityError,
    eval_diffusion,
    eval_drift,
    ld_norm,
    ld_norm_report,
    make_diffusion_field,
    make_example_field,
    rescale_field,
    truncate_drift,
)
from ldrift.regions import Annulus, Ball

E1 = math.exp(-1.0)


def test_zero_field_evaluates_to_zero_and_declares_zero_norm():
    f = make_example_field("zero", 3)
    assert f.declared_ld_norm == 0.0
    np.testing.assert_array_equal(eval_drift(f, [0.3, -1.0, 2.0]), 0.0)
    assert ld_norm(f, Ball((0.0, 0.0, 0.0), 1.0), resolution=16) == 0.0


def test_critical_field_values():
    f2 = make_example_field("example_1_1", 2)
    np.testing.assert_allclose(eval_drift(f2, [1.0, 0.0]), [-1.0, 0.0])
    f3 = make_example_field("example_1_1", 3)
    np.testing.assert_allclose(eval_drift(f3, [0.0, 0.0, 2.0]), [0.0, 0.0, -0.75])


def test_singular_point_raises():
    with pytest.raises(SingularityError):
        eval_drift(make_example_field("example_1_1", 2), [0.0, 0.0])


def test_constant_field_norm_on_unit_disc():
    f = make_example_field("constant", 2, vector=[1.0, 0.0])
    assert ld_norm(f, Ball((0.0, 0.0), 1.0)) == pytest.approx(math.sqrt(math.pi), rel=2e-2)


def test_critical_field_norm_on_annulus():
    f = make_example_field("example_1_1", 2)
    assert ld_norm(f, Annulus((0.0, 0.0), E1, 1.0)) == pytest.approx(math.sqrt(2 * math.pi), rel=2e-2)


@pytest.mark.parametrize(
    "kind,d,params",
    [
        ("truncated_example_1_1", 2, {}),
        ("truncated_example_1_1", 2, {"eps": 0.1}),
        ("radial_ld_member", 2, {}),
        ("radial_ld_member", 2, {"c": 0.5, "beta": 2.0}),
        ("truncated_example_1_1", 3, {}),
        ("radial_ld_member", 3, {}),
    ],
)
def test_declared_norm_matches_quadrature(kind, d, params):
    f = make_example_field(kind, d, **params)
    res = 256 if d == 2 else 64
    got = ld_norm(f, Ball(tuple([0.0] * d), 1.0), resolution=res)
    assert abs(got - f.declared_ld_norm) / f.declared_ld_norm < 2e-2


def test_critical_field_norm_diverges_at_the_pole():
    f = make_example_field("example_1_1", 2)
    rep = ld_norm_report(f, Ball((0.0, 0.0), 1.0), resolution=32)
    assert rep.diverged
    with pytest.raises(DivergentNormError):
        ld_norm(f, Ball((0.0, 0.0), 1.0), resolution=32)


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
def test_integrable_member_norm_on_annuli(eps):
    # |b| = 1 / (r (1 + ln(1/r))) in d = 2 integrates in closed form
    f = make_example_field("radial_ld_member", 2)
    exact = 2 * math.pi * (1 - 1 / (1 + math.log(1 / eps)))
    got = ld_norm_report(f, Annulus((0.0, 0.0), eps, 1.0), resolution=256).integral
    assert got == pytest.approx(exact, rel=2e-2)


@pytest.mark.parametrize("kwargs", [{"eps": 0.0}, {"eps": -1.0}, {"eps": 1.0}])
def test_invalid_truncation_parameter(kwargs):
    with pytest.raises(FieldError):
        make_example_field("truncated_example_1_1", 2, **kwargs)


def test_invalid_member_exponent():
    with pytest.raises(FieldError):
        make_example_field("radial_ld_member", 2, beta=0.5)
    with pytest.raises(FieldError):
        make_example_field("no_such_kind", 2)


def test_truncation_caps_magnitude_and_keeps_direction():
    f = truncate_drift(make_example_field("example_1_1", 2), 1.0)
    np.testing.assert_allclose(eval_drift(f, [0.5, 0.0]), [-1.0, 0.0])
    z = truncate_drift(make_example_field("zero", 2), 3.0)
    np.testing.assert_array_equal(eval_drift(z, [0.1, 0.2]), 0.0)
    # no singular points after truncation
    assert np.all(np.isfinite(eval_drift(f, [0.0, 0.0])))


pts2 = st.tuples(st.floats(-2, 2), st.floats(-2, 2)).filter(lambda p: p[0] ** 2 + p[1] ** 2 > 1e-8)


@given(pts2, st.floats(0.1, 50), st.floats(0.1, 50))
def test_truncation_monotone_and_idempotent(x, m1, m2):
    f = make_example_field("example_1_1", 2)
    lo, hi = sorted((m1, m2))
    a = np.linalg.norm(eval_drift(truncate_drift(f, lo), x))
    b = np.linalg.norm(eval_drift(truncate_drift(f, hi), x))
    assert a <= b * (1 + 1e-12)
    assert a <= lo * (1 + 1e-12)
    once = truncate_drift(f, lo)
    np.testing.assert_array_equal(eval_drift(truncate_drift(once, lo), x), eval_drift(once, x))


@pytest.mark.parametrize("level", [1.0, 10.0, 100.0])
def test_truncated_norm_below_split_bound(level):
    d = 2
    f = make_example_field("example_1_1", d)
    t = truncate_drift(f, level)
    eps = min(0.5, (d / 2.0) / level)  # |b| = level on the sphere of radius eps
    whole = ld_norm(t, Ball((0.0, 0.0), 1.0), resolution=128)
    outer = ld_norm(f, Annulus((0.0, 0.0), eps, 1.0), resolution=128)
    inner = ld_norm(t, Ball((0.0, 0.0), eps), resolution=128)
    assert whole <= (outer + inner) * (1 + 1e-2)


def test_rescale_identity_and_constant():
    f = make_example_field("example_1_1", 2)
    g = rescale_field(f, 1.0)
    x = np.array([[0.3, 0.4], [1.0, -2.0]])
    np.testing.assert_allclose(g.evaluate_many(x), f.evaluate_many(x))
    v = make_example_field("constant", 2, vector=[1.0, 2.0])
    np.testing.assert_allclose(eval_drift(rescale_field(v, 2.0), [1.5, 0.0]), [0.5, 1.0])
    n1 = ld_norm(v, Ball((0.0, 0.0), 1.0), resolution=64)
    n2 = ld_norm(rescale_field(v, 2.0), Ball((0.0, 0.0), 2.0), resolution=64)
    assert n2 == pytest.approx(n1, rel=1e-2)


def test_rescaled_critical_field_norm_on_rescaled_annulus():
    g = rescale_field(make_example_field("example_1_1", 2), 3.0)
    assert ld_norm(g, Annulus((0.0, 0.0), 3 * E1, 3.0)) == pytest.approx(2.5066, rel=2e-2)


@pytest.mark.parametrize("kind", ["constant", "truncated_example_1_1", "radial_ld_member"])
@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_rescale_preserves_norm(kind, c):
    f = make_example_field(kind, 2)
    base = ld_norm(f, Ball((0.0, 0.0), 1.0), resolution=128)
    scaled = ld_norm(rescale_field(f, c), Ball((0.0, 0.0), c), resolution=128)
    assert abs(scaled - base) / base < 1e-2


def test_identity_diffusion():
    a, s = eval_diffusion(make_diffusion_field("identity", 3), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(a, np.eye(3))
    np.testing.assert_allclose(s, np.eye(3))


def test_diagonal_diffusion_square_root():
    delta = 0.25
    f = make_diffusion_field("constant", 2, delta, matrix=[[delta, 0.0], [0.0, 1 / delta]])
    _, s = eval_diffusion(f, [0.0, 0.0])
    np.testing.assert_allclose(s, np.diag([math.sqrt(delta), 1 / math.sqrt(delta)]))


def test_rotated_diffusion_eigenvalues_in_band():
    delta = 0.3
    f = make_diffusion_field("rotated_diagonal", 2, delta, omega=2.0)
    rng = np.random.default_rng(0)
    for x in rng.uniform(-3, 3, size=(1000, 2)):
        a, s = eval_diffusion(f, x)
        w = np.linalg.eigvalsh(a)
        assert delta - 1e-12 <= w[0] and w[-1] <= 1 / delta + 1e-12
        np.testing.assert_allclose(s @ s.T, a, atol=1e-12)


def test_ellipticity_violation_raises():
    with pytest.raises(EllipticityError):
        make_diffusion_field("constant", 2, 0.5, matrix=[[0.1, 0.0], [0.0, 1.0]])
    with pytest.raises(EllipticityError):
        make_diffusion_field("constant", 2, 0.5, matrix=[[1.0, 0.3], [0.0, 1.0]])
