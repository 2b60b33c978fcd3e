import math

import numpy as np
import pytest
from scipy import integrate, special

from ldrift.verify.oracles import (
    OracleError,
    bessel_j,
    bessel_zero,
    bm_confinement_rate,
    bm_domain_green,
    bm_domain_green_ball_mass,
    bm_exit_moment,
    bm_half_discounted,
    bm_hitting_prob,
    bm_laplace_exit,
    bm_occupation_ball,
    bm_resolvent_ball,
    bm_resolvent_kernel,
    bm_tube_rate,
    fd_confinement_rate,
    fd_exit_moment,
    fd_hitting_prob,
    kernel_ball_mass,
    newton_ball_potential,
    quad_resolvent_kernel,
)

REL = 1e-6


def test_hitting_probability_examples():
    assert bm_hitting_prob(3, 0.25, 1.0, 0.25) == 1.0
    assert bm_hitting_prob(3, 0.25, 1.0, 1.0) == 0.0
    assert bm_hitting_prob(3, 0.25, 1.0, 0.5) == pytest.approx(1 / 3, rel=1e-14)
    assert bm_hitting_prob(2, 0.1, 1.0, 0.1) == pytest.approx(1.0)
    with pytest.raises(OracleError):
        bm_hitting_prob(3, 0.5, 1.0, 0.25)


@pytest.mark.parametrize("d,r,R,rho", [(3, 0.25, 1.0, 0.5), (3, 0.1, 1.0, 0.7), (2, 0.2, 1.0, 0.5), (4, 0.3, 2.0, 1.1)])
def test_hitting_probability_cross_check(d, r, R, rho):
    assert fd_hitting_prob(d, r, R, rho) == pytest.approx(bm_hitting_prob(d, r, R, rho), rel=REL)


def test_exit_moment_examples():
    assert bm_exit_moment(2, 1.0, 1.0) == 0.0
    assert bm_exit_moment(2, 1.0, 0.0) == 0.5
    for c in (0.5, 2.0, 7.0):
        assert bm_exit_moment(3, c * 1.0, c * 0.4) == pytest.approx(c * c * bm_exit_moment(3, 1.0, 0.4))


@pytest.mark.parametrize("d,x", [(2, 0.0), (2, 0.5), (3, 0.3), (3, 0.0)])
def test_exit_moment_cross_check(d, x):
    assert fd_exit_moment(d, 1.0, x) == pytest.approx(bm_exit_moment(d, 1.0, x), rel=REL)


def test_resolvent_kernel_examples():
    assert bm_resolvent_kernel(0.5, 1.0) == pytest.approx(math.exp(-1) / (2 * math.pi), rel=1e-14)
    assert bm_resolvent_kernel(0.5, 1.0) == pytest.approx(0.05855, abs=1e-5)
    r = np.linspace(0.1, 20, 200)
    v = bm_resolvent_kernel(0.5, r)
    assert np.all(np.diff(v) < 0) and v[-1] < 1e-8
    with pytest.raises(OracleError):
        bm_resolvent_kernel(0.5, 0.0)


@pytest.mark.parametrize("lam,r", [(0.5, 1.0), (1.0, 0.3), (10.0, 0.5), (0.1, 3.0)])
def test_resolvent_kernel_cross_check(lam, r):
    assert quad_resolvent_kernel(lam, r) == pytest.approx(bm_resolvent_kernel(lam, r), rel=REL)


@pytest.mark.parametrize("lam", [0.5, 1.0, 4.0])
def test_resolvent_kernel_normalization(lam):
    total, _ = integrate.quad(lambda r: 4 * math.pi * r * r * bm_resolvent_kernel(lam, r), 0, np.inf, epsrel=1e-12)
    assert total == pytest.approx(1 / lam, rel=REL)
    assert bm_resolvent_ball(lam, 50.0) == pytest.approx(1 / lam, rel=REL)


def test_resolvent_ball_matches_kernel_quadrature():
    for lam, rho in [(1.0, 0.5), (100.0, 0.1), (1e4, 0.01)]:
        ref = kernel_ball_mass(lambda r: bm_resolvent_kernel(lam, r), 3, 0.0, rho)
        assert bm_resolvent_ball(lam, rho) == pytest.approx(ref, rel=REL)


def test_confinement_rate_examples():
    assert bm_confinement_rate(2, 1.0) == pytest.approx(2.404825557695773**2 / 2, rel=1e-12)
    assert bm_confinement_rate(2, 1.0) == pytest.approx(2.8916, abs=1e-4)
    assert bm_confinement_rate(3, 1.0) == pytest.approx(math.pi**2 / 2, rel=1e-12)
    assert bm_confinement_rate(2, 2.0) == pytest.approx(bm_confinement_rate(2, 1.0) / 4, rel=1e-14)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_confinement_rate_cross_check(d):
    assert fd_confinement_rate(d, 1.0) == pytest.approx(bm_confinement_rate(d, 1.0), rel=REL)


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 2.5])
def test_bessel_against_scipy(nu):
    for x in (0.1, 1.0, 5.0, 12.0):
        assert bessel_j(nu, x) == pytest.approx(special.jv(nu, x), rel=1e-10, abs=1e-13)
    assert bessel_zero(nu) == pytest.approx(special.jn_zeros(int(nu), 1)[0] if nu == int(nu) else _half_zero(nu), rel=1e-12)


def _half_zero(nu):
    from scipy.optimize import brentq

    return brentq(lambda x: special.jv(nu, x), max(nu, 0.1), nu + 5.0, xtol=1e-15)


def test_tube_rate():
    assert bm_tube_rate(2) == pytest.approx(math.pi / 2)
    assert bm_tube_rate(3) == pytest.approx(special.jn_zeros(0, 1)[0], rel=1e-12)


def test_occupation_ball_examples_and_quadrature():
    assert bm_occupation_ball(3, 1.0, 0.5) == pytest.approx(0.25 - 2 * 0.125 / 3, rel=1e-14)
    assert bm_occupation_ball(3, 1.0, 0.5) == pytest.approx(1 / 6)
    assert bm_occupation_ball(3, 1.0, 1.0) == pytest.approx(bm_exit_moment(3, 1.0, 0.0))
    assert bm_occupation_ball(2, 1.0, 1.0) == pytest.approx(bm_exit_moment(2, 1.0, 0.0))
    for r in (0.1, 0.3, 0.8):
        ref, _ = integrate.quad(lambda s: 4 * math.pi * s * s * bm_domain_green(3, 1.0, s), 0, r, epsrel=1e-12)
        assert bm_occupation_ball(3, 1.0, r) == pytest.approx(ref, rel=REL)


@pytest.mark.parametrize("d,c,rho", [(3, 0.5, 0.15), (3, 0.1, 0.3), (3, 0.0, 0.4), (2, 0.5, 0.2), (2, 0.1, 0.3)])
def test_domain_green_ball_mass_against_quadrature(d, c, rho):
    if d == 3:
        def kern(r):
            return bm_domain_green(3, 1.0, r)
    else:
        def kern(r):
            return math.log(1.0 / r) / math.pi
    ref = kernel_ball_mass(kern, d, c, rho)
    assert bm_domain_green_ball_mass(d, 1.0, [c] + [0.0] * (d - 1), rho) == pytest.approx(ref, rel=REL)


@pytest.mark.parametrize("d,c,rho", [(3, 0.7, 0.2), (3, 0.1, 0.5), (2, 0.7, 0.2), (2, 0.1, 0.5)])
def test_newton_potential_against_quadrature(d, c, rho):
    kern = (lambda r: 1.0 / r) if d == 3 else (lambda r: math.log(1.0 / r))
    assert newton_ball_potential(d, c, rho) == pytest.approx(kernel_ball_mass(kern, d, c, rho), rel=REL)


def test_half_discounted_limits():
    # lam -> infinity: only the first visit inside counts, leaving the exit moment
    assert bm_half_discounted(1e12) == pytest.approx(bm_exit_moment(3, 1.0, 0.0), rel=1e-5)
    # generator factor 1/2 from the centre with lam = 1
    k = math.sqrt(2.0)
    assert bm_half_discounted(1.0) == pytest.approx(1 / 3 + 2 / (3 * (1 + k)), rel=1e-14)


def test_laplace_exit_against_series():
    # d = 3: E exp(-lam tau) from the centre is k R / sinh(k R), k = sqrt(2 lam)
    for lam in (0.5, 2.0, 50.0):
        k = math.sqrt(2 * lam)
        assert bm_laplace_exit(3, 1.0, 0.0, lam) == pytest.approx(k / math.sinh(k), rel=1e-10)
    # d = 2 from the centre: 1 / I_0(k R)
    assert bm_laplace_exit(2, 1.0, 0.0, 1.0) == pytest.approx(1 / special.iv(0, math.sqrt(2)), rel=1e-10)
    assert bm_laplace_exit(2, 1.0, 1.0, 1.0) == pytest.approx(1.0)
    # small-lam expansion recovers the mean exit time
    lam = 1e-6
    assert (1 - bm_laplace_exit(2, 1.0, 0.0, lam)) / lam == pytest.approx(0.5, rel=1e-5)
