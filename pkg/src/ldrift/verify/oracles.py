"""Closed-form Brownian-motion oracles and independent numerical cross-checks.

All quantities refer to the generator ``Delta / 2`` (standard Brownian
motion).  Each closed form has a second, independent numerical route
(finite differences with Richardson extrapolation, series-plus-bisection,
or quadrature) used to validate it before any Monte-Carlo comparison.
"""

import math

import numpy as np
from scipy import integrate, linalg, special

__all__ = [
    "OracleError",
    "bm_hitting_prob",
    "bm_exit_moment",
    "bm_occupation_ball",
    "bm_resolvent_kernel",
    "bm_resolvent_ball",
    "bm_confinement_rate",
    "bm_domain_green",
    "bm_domain_green_ball_mass",
    "bm_half_discounted",
    "bm_laplace_exit",
    "bm_tube_rate",
    "kernel_ball_mass",
    "newton_ball_potential",
    "bessel_j",
    "bessel_zero",
    "fd_confinement_rate",
    "fd_exit_moment",
    "fd_hitting_prob",
    "quad_resolvent_kernel",
]


class OracleError(ValueError):
    pass


def bm_hitting_prob(d, r, R, rho):
    """Probability that BM from ``|x| = rho`` reaches ``B_r`` before leaving ``B_R``.

    ``(rho^(2-d) - R^(2-d)) / (r^(2-d) - R^(2-d))`` for ``d >= 3`` and
    ``ln(R / rho) / ln(R / r)`` for ``d = 2``.
    """
    if not 0 < r <= rho <= R or r == R:
        raise OracleError("need 0 < r <= rho <= R with r < R")
    if d == 2:
        return math.log(R / rho) / math.log(R / r)
    if d < 2:
        raise OracleError("dimension must be at least 2")
    e = 2.0 - d
    return (rho**e - R**e) / (r**e - R**e)


def bm_exit_moment(d, R, x_norm):
    """Mean exit time of ``B_R`` from ``|x| = x_norm``: ``(R^2 - |x|^2) / d``."""
    if not 0 <= x_norm <= R:
        raise OracleError("need 0 <= |x| <= R")
    return (R * R - x_norm * x_norm) / d


def bm_domain_green(d, R, y_norm):
    """Green function of ``Delta / 2`` on ``B_R`` with pole at the centre, ``d >= 3``."""
    if d < 3:
        raise OracleError("implemented for d >= 3")
    cd = math.gamma(d / 2.0 - 1.0) / (2.0 * math.pi ** (d / 2.0))
    return cd * (np.asarray(y_norm, float) ** (2 - d) - R ** (2 - d))


def bm_occupation_ball(d, R, r):
    """Expected time in ``B_r`` before leaving ``B_R``, BM from the centre, ``r <= R``.

    Radial integral of the domain Green function:
    ``2 / (d - 2) * (r^2 / 2 - r^d R^(2-d) / d)`` for ``d >= 3`` (which is
    ``r^2 - 2 r^3 / 3`` for ``d = 3, R = 1``) and ``r^2 (ln(R/r) + 1/2)`` for ``d = 2``.
    """
    if not 0 < r <= R:
        raise OracleError("need 0 < r <= R")
    if d == 2:
        # green 1/pi ln(R/|y|); integral over B_r
        return r * r * (math.log(R / r) + 0.5)
    # int_0^r c_d (s^(2-d) - R^(2-d)) |S^(d-1)| s^(d-1) ds, with c_d |S^(d-1)| = 2 / (d - 2)
    return 2.0 / (d - 2.0) * (r * r / 2.0 - r**d * R ** (2 - d) / d)


def bm_resolvent_kernel(lam, r, d=3):
    """Density of ``(lam - Delta/2)^-1`` in ``d = 3``: ``exp(-sqrt(2 lam) r) / (2 pi r)``."""
    if d != 3:
        raise OracleError("closed form implemented for d = 3")
    if not lam > 0:
        raise OracleError("lambda must be positive")
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0):
        raise OracleError("resolvent kernel has a pole at r = 0")
    out = np.exp(-math.sqrt(2.0 * lam) * r) / (2.0 * math.pi * r)
    return float(out) if out.ndim == 0 else out


def bm_resolvent_ball(lam, rho):
    """``E int exp(-lam t) I(|w_t| <= rho) dt`` from the centre, ``d = 3``."""
    k = math.sqrt(2.0 * lam)
    # 4 pi int_0^rho s^2 e^{-ks}/(2 pi s) ds = (2/k^2) (1 - e^{-k rho}(1 + k rho))
    return 2.0 / (k * k) * (1.0 - math.exp(-k * rho) * (1.0 + k * rho))


def bm_half_discounted(lam, R=1.0, generator_factor=0.5):
    """``E int_0^inf exp(-lam phi_t) I(|w_t| <= R) dt`` from the centre, ``d = 3``.

    ``phi_t`` is the time spent outside ``B_R``.  The radial solution is
    ``A - r^2 / (6 g)`` inside and ``C exp(-k r) / r`` outside with
    ``k = sqrt(lam / g)`` for the generator ``g Delta``; matching value and
    slope at ``R`` gives ``R^2 / (6 g) + R^2 / (3 g (1 + k R))``.
    """
    if not lam > 0:
        raise OracleError("lambda must be positive")
    g = float(generator_factor)
    k = math.sqrt(lam / g)
    return R * R / (6 * g) + R * R / (3 * g * (1 + k * R))


def bm_laplace_exit(d, R, x_norm, lam, generator_factor=0.5):
    """``E exp(-lam tau_R)`` from ``|x| = x_norm`` for the generator ``g Delta``.

    Radial solution ``r^(1-d/2) I_(d/2-1)(k r)`` of ``g Delta u = lam u`` with
    ``k = sqrt(lam / g)``, normalized to 1 on the sphere.
    """
    if not 0 <= x_norm <= R:
        raise OracleError("need 0 <= |x| <= R")
    if not lam > 0:
        raise OracleError("lambda must be positive")
    nu = d / 2.0 - 1.0
    k = math.sqrt(lam / generator_factor)

    def radial(r):
        # r^-nu I_nu(k r), scaled by exp(-k R) to avoid overflow
        if r == 0:
            return (k / 2.0) ** nu / math.gamma(nu + 1.0) * math.exp(-k * R)
        return r ** (-nu) * special.ive(nu, k * r) * math.exp(k * (r - R))

    return float(radial(float(x_norm)) / radial(float(R)))


def bm_tube_rate(d, R=1.0):
    """Decay rate in the axial direction of positive harmonic functions in a round tube of radius ``R``.

    ``j / R`` with ``j`` the first zero of ``J_((d-3)/2)``; for ``d = 2`` this
    is ``pi / (2 R)``.
    """
    if d < 2:
        raise OracleError("dimension must be at least 2")
    if d == 2:
        return math.pi / (2.0 * R)
    return bessel_zero((d - 3) / 2.0) / R


def newton_ball_potential(d, center_norm, radius):
    """``int_B k(|y|) dy`` over ``B = B_radius(c)`` for the Newton kernel.

    ``k = 1/|y|`` for ``d = 3`` (shell theorem: ``|B| / |c|`` outside,
    ``2 pi (rho^2 - |c|^2 / 3)`` inside) and ``k = ln(1/|y|)`` for ``d = 2``.
    """
    s, rho = float(center_norm), float(radius)
    if d == 3:
        if s >= rho:
            return 4.0 * math.pi * rho**3 / (3.0 * s)
        return 2.0 * math.pi * (rho * rho - s * s / 3.0)
    if d == 2:
        if s >= rho:
            return math.pi * rho * rho * math.log(1.0 / s)
        return math.pi * rho * rho * (math.log(1.0 / rho) + 0.5) - 0.5 * math.pi * s * s
    raise OracleError("implemented for d = 2 and 3")


def bm_domain_green_ball_mass(d, R, center, radius):
    """Domain Green measure of ``B_radius(center)`` for BM started at the centre of ``B_R``."""
    c = float(np.linalg.norm(center))
    if c + radius > R * (1 + 1e-12):
        raise OracleError("ball must lie inside the domain")
    vol = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d
    if d == 3:
        return (newton_ball_potential(3, c, radius) - vol / R) / (2.0 * math.pi)
    if d == 2:
        return (newton_ball_potential(2, c, radius) + vol * math.log(R)) / math.pi
    raise OracleError("implemented for d = 2 and 3")


def _sphere_in_ball(d, r, s, rho):
    """Measure of ``{|y| = r} cap B_rho(c)`` with ``|c| = s`` (area for d = 3, length for d = 2)."""
    full = 4.0 * math.pi * r * r if d == 3 else 2.0 * math.pi * r
    if r + s <= rho:
        return full
    if r >= s + rho or r <= s - rho or s == 0:
        return 0.0
    cos0 = np.clip((r * r + s * s - rho * rho) / (2.0 * r * s), -1.0, 1.0)
    if d == 3:
        return 2.0 * math.pi * r * r * (1.0 - cos0)
    return 2.0 * r * math.acos(cos0)


def kernel_ball_mass(kernel, d, center_norm, radius):
    """``int_B kernel(|y|) dy`` by radial quadrature of the sphere-ball overlap, ``d = 2, 3``."""
    if d not in (2, 3):
        raise OracleError("implemented for d = 2 and 3")
    s, rho = float(center_norm), float(radius)
    lo, hi = max(0.0, s - rho), s + rho
    pts = sorted({p for p in (rho - s, s) if lo < p < hi})

    def f(r):
        return kernel(r) * _sphere_in_ball(d, r, s, rho) if r > 0 else 0.0

    val, _ = integrate.quad(f, lo, hi, points=pts or None, epsabs=0, epsrel=1e-11, limit=400)
    return val


# ---------------------------------------------------------------------------
# Bessel functions by power series


def bessel_j(nu, x):
    """``J_nu(x)`` from its power series (accurate for ``0 <= x <= 30``)."""
    if x < 0:
        raise OracleError("series implemented for x >= 0")
    if x == 0:
        return 1.0 if nu == 0 else 0.0
    half = 0.5 * x
    lg = nu * math.log(half) - math.lgamma(nu + 1.0)
    term = math.exp(lg)
    terms = [term]
    q = -half * half
    for k in range(1, 200):
        term *= q / (k * (k + nu))
        terms.append(term)
        if abs(term) < 1e-18 * max(abs(t) for t in terms[-5:]) and k > 5:
            break
    return math.fsum(terms)


def bessel_zero(nu, tol=1e-15):
    """First positive zero of ``J_nu`` by scanning for a sign change and bisecting."""
    if nu < 0:
        raise OracleError("order must be nonnegative")
    step = 0.05
    a = max(nu, step)
    fa = bessel_j(nu, a)
    while True:
        b = a + step
        fb = bessel_j(nu, b)
        if fa * fb <= 0:
            break
        a, fa = b, fb
        if a > 30:
            raise OracleError("no zero found below 30")
    while b - a > tol * b:
        m = 0.5 * (a + b)
        fm = bessel_j(nu, m)
        if fm == 0:
            return m
        if fa * fm < 0:
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def bm_confinement_rate(d, R):
    """Principal Dirichlet eigenvalue of ``Delta / 2`` on ``B_R``: ``j_{d/2-1,1}^2 / (2 R^2)``."""
    if d < 2:
        raise OracleError("dimension must be at least 2")
    if not R > 0:
        raise OracleError("radius must be positive")
    j = bessel_zero(d / 2.0 - 1.0)
    return j * j / (2.0 * R * R)


# ---------------------------------------------------------------------------
# independent numerical routes


def _radial_stiffness(d, R, n):
    """Cell-centred flux discretization of ``-(1/2) r^(1-d) (r^(d-1) u')'`` with ``u(R) = 0``."""
    h = R / n
    rc = (np.arange(n) + 0.5) * h
    rf = np.arange(n + 1) * h
    flux = rf ** (d - 1) / h
    mass = rc ** (d - 1) * h
    diag = np.zeros(n)
    off = np.zeros(n - 1)
    diag += flux[1:] + flux[:-1]
    # Dirichlet at r = R through a ghost cell u_n = -u_{n-1}
    diag[-1] += flux[-1]
    off[:] = -flux[1:-1]
    return 0.5 * diag, 0.5 * off, mass, rc


def fd_confinement_rate(d, R, n=1000):
    """Principal eigenvalue by finite differences at ``n, 2n, 4n`` cells with Richardson extrapolation."""
    vals = []
    for m in (n, 2 * n, 4 * n):
        dg, off, mass, _ = _radial_stiffness(d, R, m)
        s = 1.0 / np.sqrt(mass)
        w = linalg.eigh_tridiagonal(dg * s * s, off * s[:-1] * s[1:], select="i", select_range=(0, 0), eigvals_only=True)
        vals.append(float(w[0]))
    r1 = (4 * vals[1] - vals[0]) / 3
    r2 = (4 * vals[2] - vals[1]) / 3
    return (16 * r2 - r1) / 15


def fd_exit_moment(d, R, x_norm, n=2000):
    """Solve ``(1/2) Delta u = -1``, ``u(R) = 0`` radially and interpolate at ``x_norm``."""
    out = []
    for m in (n, 2 * n):
        dg, off, mass, rc = _radial_stiffness(d, R, m)
        ab = np.zeros((3, m))
        ab[0, 1:] = off
        ab[1] = dg
        ab[2, :-1] = off
        u = linalg.solve_banded((1, 1), ab, mass)
        # quadratic extrapolation to r = 0 or linear interpolation elsewhere
        out.append(float(np.interp(x_norm, np.concatenate([[0.0], rc, [R]]), np.concatenate([[1.5 * u[0] - 0.5 * u[1]], u, [0.0]]))))
    return (4 * out[1] - out[0]) / 3


def fd_hitting_prob(d, r, R, rho, n=2000):
    """Solve ``Delta u = 0`` on ``[r, R]`` radially with ``u(r) = 1, u(R) = 0`` (nodal FD, Richardson)."""
    out = []
    for m in (n, 2 * n, 4 * n):
        x = np.linspace(r, R, m + 1)
        h = x[1] - x[0]
        xi = x[1:-1]
        # u'' + (d-1)/x u' = 0
        lo = 1.0 / h**2 - (d - 1) / (2 * h * xi)
        di = -2.0 / h**2 * np.ones_like(xi)
        up = 1.0 / h**2 + (d - 1) / (2 * h * xi)
        rhs = np.zeros_like(xi)
        rhs[0] -= lo[0] * 1.0
        ab = np.zeros((3, xi.size))
        ab[0, 1:] = up[:-1]
        ab[1] = di
        ab[2, :-1] = lo[1:]
        u = linalg.solve_banded((1, 1), ab, rhs)
        full = np.concatenate([[1.0], u, [0.0]])
        out.append(float(np.interp(rho, x, full)))
    r1 = (4 * out[1] - out[0]) / 3
    r2 = (4 * out[2] - out[1]) / 3
    return (16 * r2 - r1) / 15


def quad_resolvent_kernel(lam, r, d=3):
    """``int_0^inf exp(-lam t) p_t(r) dt`` with the Gaussian heat kernel, by adaptive quadrature."""

    def integrand(t):
        return math.exp(-lam * t - r * r / (2 * t)) * (2 * math.pi * t) ** (-d / 2)

    t_peak = r * r / d
    a, _ = integrate.quad(integrand, 0.0, t_peak, epsabs=0, epsrel=1e-12, limit=200)
    b, _ = integrate.quad(integrand, t_peak, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    return a + b
