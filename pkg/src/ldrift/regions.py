"""Closed regions of R^d used as domains, targets and occupation sets.

Every region supports ``contains(points)`` for a single point or an
``(n, d)`` array, and ``bounds()`` giving an axis-aligned bounding box when
the region is bounded.  Regions the fused walker understands also expose
``engine_spec()``.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["Region", "Ball", "Annulus", "Cylinder", "BallComplement", "Halfspace", "GridRegion", "EmptyRegion"]


def _pts(points):
    p = np.asarray(points, dtype=np.float64)
    return p, p.ndim == 1


class Region:
    """Base class; subclasses implement ``_contains`` on an ``(n, d)`` array."""

    bounded = True

    def contains(self, points):
        p, single = _pts(points)
        out = self._contains(p.reshape(-1, p.shape[-1]))
        return bool(out[0]) if single else out.reshape(p.shape[:-1])

    def engine_spec(self):
        raise TypeError(f"{type(self).__name__} is not supported by the fused walker")


def _radius(p, c):
    return np.sqrt(np.sum((p - c) ** 2, axis=-1))


@dataclass(frozen=True)
class Ball(Region):
    center: Sequence[float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self):
        return len(self.center)

    def _contains(self, p):
        return _radius(p, np.asarray(self.center, float)) <= self.radius

    def bounds(self):
        c = np.asarray(self.center, float)
        return c - self.radius, c + self.radius

    def volume(self):
        d = self.dim
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.radius**d

    def engine_spec(self):
        return 1, tuple(float(v) for v in self.center) + (float(self.radius),)


@dataclass(frozen=True)
class Annulus(Region):
    center: Sequence[float]
    inner: float
    outer: float

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise ValueError("annulus needs 0 <= inner < outer")

    def _contains(self, p):
        r = _radius(p, np.asarray(self.center, float))
        return (r >= self.inner) & (r <= self.outer)

    def bounds(self):
        c = np.asarray(self.center, float)
        return c - self.outer, c + self.outer


@dataclass(frozen=True)
class Cylinder(Region):
    """Round cylinder ``[0, n R] x {|x'| <= R}`` with axis along the first coordinate."""

    n: float
    radius: float
    dim: int = 2

    def __post_init__(self):
        if not (self.radius > 0 and self.n > 0):
            raise ValueError("cylinder needs positive radius and length")

    @property
    def length(self):
        return self.n * self.radius

    def _contains(self, p):
        side = np.sqrt(np.sum(p[:, 1:] ** 2, axis=1))
        return (p[:, 0] >= 0) & (p[:, 0] <= self.length) & (side <= self.radius)

    def bounds(self):
        lo = np.full(self.dim, -self.radius)
        hi = np.full(self.dim, self.radius)
        lo[0], hi[0] = 0.0, self.length
        return lo, hi

    def face(self, x):
        """Boundary face nearest to (or most violated by) ``x``: far-end, near-end or side."""
        x = np.asarray(x, float)
        gaps = {
            "near-end": -x[0],
            "far-end": x[0] - self.length,
            "side": float(np.linalg.norm(x[1:])) - self.radius,
        }
        return max(gaps, key=gaps.get)

    def engine_spec(self):
        return 2, (float(self.length), float(self.radius))


@dataclass(frozen=True)
class BallComplement(Region):
    center: Sequence[float]
    radius: float
    bounded = False

    def _contains(self, p):
        return _radius(p, np.asarray(self.center, float)) >= self.radius


@dataclass(frozen=True)
class Halfspace(Region):
    """``{x : normal . x >= offset}`` with a unit normal."""

    normal: Sequence[float]
    offset: float = 0.0
    bounded = False

    def __post_init__(self):
        n = np.asarray(self.normal, float)
        if not np.isclose(np.linalg.norm(n), 1.0):
            raise ValueError("halfspace normal must be a unit vector")

    def _contains(self, p):
        return p @ np.asarray(self.normal, float) >= self.offset

    def engine_spec(self):
        return 3, tuple(float(v) for v in self.normal) + (float(self.offset),)


@dataclass(frozen=True)
class EmptyRegion(Region):
    def _contains(self, p):
        return np.zeros(p.shape[0], dtype=bool)

    def bounds(self):
        return np.zeros(1), np.zeros(1)


@dataclass(frozen=True, eq=False)
class GridRegion(Region):
    """Region given by occupied cells of a grid set (see :class:`ldrift.inkspots.GridSet`)."""

    grid: object

    def _contains(self, p):
        return self.grid.contains(p)

    def bounds(self):
        r = self.grid.radius
        return np.full(self.grid.dim, -r), np.full(self.grid.dim, r)
