"""Weighted least-squares power-law fits in log-log coordinates."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = ["FitError", "ScalingFit", "fit_power_law", "fit_line"]


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class ScalingFit:
    """Result of fitting ``log y = intercept + slope * log x``.

    With per-point standard errors the fit is weighted and the errors are
    taken as absolute (normal 95% interval); without them the residual
    scatter sets the error and a Student-t interval is used.
    """

    log_x: np.ndarray
    log_y: np.ndarray
    log_y_se: np.ndarray
    slope: float
    intercept: float
    slope_se: float
    intercept_se: float
    slope_ci: tuple
    chi2_dof: float
    r_squared: float

    def predict(self, x):
        return np.exp(self.intercept) * np.asarray(x, float) ** self.slope

    def covers(self, value):
        return self.slope_ci[0] <= value <= self.slope_ci[1]


def fit_line(x, y, se=None, level=0.95):
    """Weighted linear regression ``y = a + b x``; returns ``(b, a, b_se, a_se, ci, chi2/dof, R^2)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 3 or x.size != y.size:
        raise FitError("need at least 3 points")
    if np.ptp(x) == 0:
        raise FitError("abscissae are all equal")
    absolute = se is not None
    if absolute:
        se = np.asarray(se, dtype=np.float64)
        if np.any(~(se > 0)):
            raise FitError("standard errors must be positive")
        w = 1.0 / se**2
    else:
        w = np.ones_like(x)
    X = np.stack([np.ones_like(x), x], axis=1)
    A = X.T @ (w[:, None] * X)
    coef = np.linalg.solve(A, X.T @ (w * y))
    res = y - X @ coef
    dof = x.size - 2
    chi2 = float(np.sum(w * res**2))
    cov = np.linalg.inv(A)
    if absolute:
        q = stats.norm.ppf(0.5 + level / 2)
    else:
        cov = cov * chi2 / dof
        q = stats.t.ppf(0.5 + level / 2, dof)
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - chi2 / ss_tot if ss_tot > 0 else 1.0
    b_se = math.sqrt(max(cov[1, 1], 0.0))
    a_se = math.sqrt(max(cov[0, 0], 0.0))
    b = float(coef[1])
    return b, float(coef[0]), b_se, a_se, (b - q * b_se, b + q * b_se), chi2 / dof, r2


def fit_power_law(x, y, se=None, level=0.95):
    """Fit ``y = C x^slope`` by (weighted) least squares on ``(log x, log y)``.

    ``se`` are standard errors of ``y``; they become ``se / y`` on the log scale.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 3:
        raise FitError("need at least 3 points")
    if np.any(~(y > 0)) or np.any(~(x > 0)):
        raise FitError("power-law fit needs positive abscissae and ordinates")
    lx, ly = np.log(x), np.log(y)
    lse = None if se is None else np.asarray(se, dtype=np.float64) / y
    b, a, b_se, a_se, ci, chi2, r2 = fit_line(lx, ly, lse, level)
    return ScalingFit(lx, ly, lse if lse is not None else np.full(lx.shape, np.nan), b, a, b_se, a_se, ci, chi2, r2)
