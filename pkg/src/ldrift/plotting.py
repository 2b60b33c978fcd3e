"""SVG figures built only from on-disk artifacts (results CSV or Green estimate files).

Plot kinds:

``survival``
    exit-time survival curve (rows ``quantity = survival``) on a log axis
    with the fitted exponential and its 95% band.
``loglog``
    any quantity against its abscissa on log-log axes with the fitted power
    law and its 95% band; one series per experiment kind.
``green-slice``
    heat map of a Green density estimate (the central slice for ``d = 3``).
``green-radial``
    shell-averaged density against distance to the start point, overlaid
    with the Brownian resolvent kernel for ``d = 3`` resolvent estimates.
"""

import csv
from pathlib import Path

import numpy as np

__all__ = ["PlotError", "PLOT_KINDS", "plot", "read_results"]

PLOT_KINDS = ("survival", "loglog", "green-slice", "green-radial")


class PlotError(ValueError):
    pass


def read_results(path):
    """Rows of a results CSV as dictionaries with float columns converted."""
    from .verify.experiments import CSV_COLUMNS

    p = Path(path)
    if not p.is_file():
        raise PlotError(f"results file {path} does not exist")
    with p.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotError(f"results file {path} is empty")
        missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise PlotError(f"results file {path} lacks columns {missing}")
        rows = list(reader)
    if not rows:
        raise PlotError(f"results file {path} has no rows")
    for r in rows:
        for k in ("abscissa", "estimate", "stderr"):
            r[k] = float(r[k])
    return rows


def _weighted_band(x, y, w, xs):
    """Weighted straight-line fit of ``y`` on ``x`` and its 95% confidence band on ``xs``."""
    X = np.column_stack([np.ones_like(x), x])
    A = X.T @ (w[:, None] * X)
    cov = np.linalg.inv(A)
    beta = cov @ (X.T @ (w * y))
    resid = y - X @ beta
    dof = max(len(x) - 2, 1)
    scale = max(float(np.sum(w * resid**2)) / dof, 1.0)
    Xs = np.column_stack([np.ones_like(xs), xs])
    fit = Xs @ beta
    se = np.sqrt(np.einsum("ij,jk,ik->i", Xs, cov * scale, Xs))
    return beta, fit, 1.96 * se


def _figure():
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "ldrift"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, plt, out):
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out


def _weights(y, se, log):
    se = np.where(np.isfinite(se) & (se > 0), se, np.nan)
    rel = se / y if log else se
    if np.all(np.isnan(rel)):
        return np.ones_like(y)
    rel = np.where(np.isnan(rel), np.nanmax(rel), rel)
    return 1.0 / rel**2


def _plot_survival(rows, out):
    sel = [r for r in rows if r["quantity"] == "survival" and r["estimate"] > 0]
    if len(sel) < 2:
        raise PlotError("no survival rows (run the exit_tail experiment)")
    t = np.array([r["abscissa"] for r in sel])
    s = np.array([r["estimate"] for r in sel])
    se = np.array([r["stderr"] for r in sel])
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.errorbar(t, s, yerr=1.96 * se, fmt="o", ms=4, label="estimate")
    xs = np.linspace(t.min(), t.max(), 100)
    beta, fit, band = _weighted_band(t, np.log(s), _weights(s, se, True), xs)
    ax.plot(xs, np.exp(fit), "-", label=f"rate {-beta[1]:.4f}")
    ax.fill_between(xs, np.exp(fit - band), np.exp(fit + band), alpha=0.25)
    ax.set_yscale("log")
    ax.set_xlabel("T")
    ax.set_ylabel("P(exit time > T)")
    ax.legend()
    return _save(fig, plt, out)


def _plot_loglog(rows, out, quantity):
    if quantity is None:
        quantity = rows[0]["quantity"]
    sel = [r for r in rows if r["quantity"] == quantity and r["estimate"] > 0 and r["abscissa"] > 0]
    if len(sel) < 2:
        raise PlotError(f"fewer than two positive rows with quantity {quantity!r}")
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 3.6))
    groups = {}
    for r in sel:
        groups.setdefault(r["kind"], []).append(r)
    for kind, rs in sorted(groups.items()):
        x = np.array([r["abscissa"] for r in rs])
        y = np.array([r["estimate"] for r in rs])
        se = np.array([r["stderr"] for r in rs])
        yerr = np.where(np.isfinite(se), 1.96 * se, 0.0)
        ax.errorbar(x, y, yerr=yerr, fmt="o", ms=4, label=kind)
        if np.unique(x).size >= 2:
            xs = np.linspace(np.log(x.min()), np.log(x.max()), 100)
            beta, fit, band = _weighted_band(np.log(x), np.log(y), _weights(y, se, True), xs)
            ax.plot(np.exp(xs), np.exp(fit), "-", label=f"slope {beta[1]:.3f}")
            ax.fill_between(np.exp(xs), np.exp(fit - band), np.exp(fit + band), alpha=0.25)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("abscissa")
    ax.set_ylabel(quantity)
    ax.legend(fontsize="small")
    return _save(fig, plt, out)


def _read_green(path):
    from .green import GreenError, GreenEstimate

    p = Path(path)
    if not p.is_file():
        raise PlotError(f"estimate file {path} does not exist")
    text = p.read_text()
    if not text.strip():
        raise PlotError(f"estimate file {path} is empty")
    try:
        return GreenEstimate.from_text(text)
    except GreenError as err:
        raise PlotError(str(err)) from err


def _plot_green_slice(path, out):
    est = _read_green(path)
    v = est.values
    if est.dim == 3:
        k = int(np.clip(np.floor((est.origin[2] - est.grid.lo[2]) / est.h), 0, est.grid.n - 1))
        v = v[:, :, k]
    lo = np.asarray(est.grid.lo, float)
    hi = lo + est.grid.n * est.h
    plt = _figure()
    fig, ax = plt.subplots(figsize=(4.6, 4))
    img = ax.imshow(v.T, origin="lower", extent=(lo[0], hi[0], lo[1], hi[1]), cmap="viridis")
    fig.colorbar(img, ax=ax, label="density")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    return _save(fig, plt, out)


def _plot_green_radial(path, out):
    from .verify.oracles import bm_resolvent_kernel

    est = _read_green(path)
    half = 0.5 * est.grid.n * est.h
    edges = np.linspace(est.h, half, 25)
    overlay = est.dim == 3 and est.lam is not None
    kern = (lambda r: bm_resolvent_kernel(est.lam, r)) if overlay else None
    mids, mass, mse, kmass = _profile(est, edges, kern)
    shell = np.array([_shell_volume(est.dim, a, b) for a, b in zip(edges[:-1], edges[1:])])
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ok = mass > 0
    ax.errorbar(mids[ok], mass[ok] / shell[ok], yerr=1.96 * mse[ok] / shell[ok], fmt="o", ms=3, label="estimate")
    if overlay:
        ax.plot(mids, kmass / shell, "-", label="Brownian kernel")
    ax.set_yscale("log")
    ax.set_xlabel("distance to start")
    ax.set_ylabel("shell-averaged density")
    ax.legend()
    return _save(fig, plt, out)


def _profile(est, edges, kernel):
    from .green import radial_profile

    return radial_profile(est, edges, kernel)


def _shell_volume(d, a, b):
    from .fields import ball_volume

    return ball_volume(d, b) - ball_volume(d, a)


def plot(results_path, kind, output=None, quantity=None):
    """Render ``kind`` from ``results_path`` to an SVG file; returns the output path."""
    if kind not in PLOT_KINDS:
        raise PlotError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    out = Path(output) if output else Path(results_path).with_suffix(f".{kind}.svg")
    if kind == "survival":
        return _plot_survival(read_results(results_path), out)
    if kind == "loglog":
        return _plot_loglog(read_results(results_path), out, quantity)
    if kind == "green-slice":
        return _plot_green_slice(results_path, out)
    return _plot_green_radial(results_path, out)

