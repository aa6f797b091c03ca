"""Finite pointed metric spaces."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph

from ..errors import InvalidInput, TriangleViolation

TRIANGLE_RTOL = 1e-9


def triangle_excess(d):
    """Largest d[i,k] - d[i,j] - d[j,k] over all triples (vectorized per middle point)."""
    n = d.shape[0]
    worst = -np.inf
    for j in range(n):
        worst = max(worst, float(np.max(d - d[:, j][:, None] - d[j, :][None, :])))
    return worst


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Pointed finite metric space.

    Distances are stored as a base matrix times a scale factor so repeated
    rescalings compose exactly.  ``points`` optionally records where each
    sample came from (chart coordinates or polar coordinates); ``short`` flags
    a sample that returned fewer points than requested.
    """

    base: np.ndarray
    basepoint: int = 0
    scale: float = 1.0
    points: np.ndarray | None = None
    short: bool = False
    check: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.array(self.base, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
            raise InvalidInput("distance matrix must be square and nonempty")
        n = d.shape[0]
        if not 0 <= int(self.basepoint) < n:
            raise InvalidInput("basepoint index out of range")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise InvalidInput("scale must be positive")
        if self.check:
            if not np.all(np.isfinite(d)):
                raise InvalidInput("distances must be finite")
            if np.any(np.diag(d) != 0):
                raise InvalidInput("diagonal must be zero")
            if not np.array_equal(d, d.T):
                raise InvalidInput("distance matrix must be symmetric")
            off = d[~np.eye(n, dtype=bool)]
            if np.any(off <= 0):
                raise InvalidInput("distinct points must have positive distance")
            if n >= 3:
                excess = triangle_excess(d)
                if excess > TRIANGLE_RTOL * float(d.max()):
                    raise TriangleViolation(f"triangle inequality violated by {excess:.3e}")
        d.setflags(write=False)
        object.__setattr__(self, "base", d)
        object.__setattr__(self, "basepoint", int(self.basepoint))
        object.__setattr__(self, "scale", float(self.scale))
        if self.points is not None:
            pts = np.array(self.points, dtype=float)
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)

    @classmethod
    def from_matrix(cls, d, basepoint=0, **kw):
        return cls(np.asarray(d, float), basepoint, **kw)

    @property
    def d(self):
        return self.base * self.scale if self.scale != 1.0 else self.base

    @property
    def n(self):
        return self.base.shape[0]

    def rescaled(self, lam):
        if not lam > 0:
            raise InvalidInput("rescaling factor must be positive")
        return FiniteMetricSpace(self.base, self.basepoint, self.scale * lam, self.points,
                                 self.short, check=False, meta=dict(self.meta))

    def subspace(self, idx, basepoint=None):
        idx = np.asarray(idx, int)
        bp = 0 if basepoint is None else int(basepoint)
        pts = None if self.points is None else self.points[idx]
        return FiniteMetricSpace(self.base[np.ix_(idx, idx)], bp, self.scale, pts,
                                 self.short, check=False, meta=dict(self.meta))

    def ball(self, r, center=None):
        c = self.basepoint if center is None else center
        return np.flatnonzero(self.d[c] <= r)


def metric_closure(d):
    """Shortest-path closure of a dissimilarity matrix (a no-op on true metrics).

    Used to remove last-digit triangle defects left by numerical minimizers.
    """
    d = np.asarray(d, float)
    closed = csgraph.shortest_path(d, method="FW", directed=False)
    closed = np.minimum(closed, closed.T)
    np.fill_diagonal(closed, 0.0)
    return closed
