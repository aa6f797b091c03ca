"""Geometry operations dispatched on the space type."""
from __future__ import annotations

import warnings
from functools import singledispatch

import numpy as np

from ..errors import InvalidInput
from .cones import ConeSpace, SmoothedCone, SpaceForm, polar_pattern
from .grid import (DEFAULT_REACH, ConformalGrid, grid_area, grid_curvature,
                   grid_distance, grid_distances_from)
from .metric import FiniteMetricSpace, metric_closure
from .radial import RadialProfile


class TruncatedBallWarning(UserWarning):
    """A metric ball reached the chart boundary, so its area is an underestimate."""


@singledispatch
def gauss_curvature(space):
    """Gauss curvature K = -e^{-2u} Δu; NaN where unavailable."""
    raise InvalidInput(f"no curvature for {type(space).__name__}")


@gauss_curvature.register
def _(space: ConformalGrid):
    return grid_curvature(space)


@gauss_curvature.register
def _(space: RadialProfile):
    return space.curvature()


@singledispatch
def area(space, region=None):
    """Area of a region (node mask or predicate); whole chart by default."""
    raise InvalidInput(f"no area for {type(space).__name__}")


@area.register
def _(space: ConformalGrid, region=None):
    return grid_area(space, region)


@area.register
def _(space: RadialProfile, region=None):
    return space.area(region)


@singledispatch
def distance(space, p, q, **kw):
    """Intrinsic distance between two points of a space."""
    return space.distance(p, q)


@distance.register
def _(space: ConformalGrid, p, q, reach=DEFAULT_REACH):
    return grid_distance(space, p, q, reach)


@distance.register
def _(space: RadialProfile, p, q):
    return space.distance(p, q)


@singledispatch
def ball_area(space, center, r, **kw):
    """Area of the metric ball B(center, r)."""
    return space.ball_area(center, r)


@ball_area.register
def _(space: ConformalGrid, center, r, reach=DEFAULT_REACH):
    return grid_ball_areas(space, center, [r], reach)[0]


@ball_area.register
def _(space: RadialProfile, center, r):
    if center not in ("inner", "apex", 0.0, (0.0, 0.0)):
        raise InvalidInput("profile balls are centred at the inner end point")
    return space.ball_area(r)


def grid_ball_areas(grid: ConformalGrid, center, radii, reach=DEFAULT_REACH, warn=True):
    """Sum of nodal area elements e^{2u}h² over nodes within each radius.

    The centre node's own cell is split into quarter-node shares so the
    small-radius limit is not dominated by one cell.
    """
    d = grid_distances_from(grid, [center], reach)[0].reshape(grid.shape)
    dens = np.exp(2 * np.where(grid.domain, grid.u, -np.inf)) * grid.h**2
    order = np.argsort(d, axis=None, kind="stable")
    ds = d.ravel()[order]
    cum = np.cumsum(dens.ravel()[order])
    bnd = d[grid.boundary_mask]
    reach_bnd = float(bnd.min()) if bnd.size else np.inf
    out = []
    for r in radii:
        k = np.searchsorted(ds, r, side="right")
        out.append(float(cum[k - 1]) if k > 0 else 0.0)
        if warn and r >= reach_bnd:
            warnings.warn(f"ball of radius {r} reaches the chart boundary", TruncatedBallWarning)
    return out


def ball_truncated(space, center, r):
    """True when B(center, r) reaches the edge of the discretized chart."""
    if isinstance(space, ConformalGrid):
        d = grid_distances_from(space, [center])[0].reshape(space.shape)
        bnd = d[space.boundary_mask]
        return bool(bnd.size and bnd.min() <= r)
    if isinstance(space, RadialProfile):
        return space.outer == "boundary" and r >= space.meridian_positions()[-1]
    return False


def _farthest_point(dist_from, n_cand, first, n):
    """Greedy farthest-point selection; ties broken by lowest index."""
    chosen = [first]
    rows = [dist_from(first)]
    mind = rows[0].copy()
    while len(chosen) < n:
        nxt = int(np.argmax(mind))
        if mind[nxt] <= 0:
            break
        chosen.append(nxt)
        rows.append(dist_from(nxt))
        mind = np.minimum(mind, rows[-1])
    return chosen, np.array(rows)


@singledispatch
def sample_fms(space, basepoint, radius, n, **kw) -> FiniteMetricSpace:
    """n points of the ball B(basepoint, radius) chosen by farthest-point sampling.

    The basepoint is the first point.  If the ball holds fewer than n
    candidates the result is short and flagged.
    """
    return _sample_analytic(space, basepoint, radius, n, **kw)


@sample_fms.register
def _(space: ConformalGrid, basepoint, radius, n, reach=DEFAULT_REACH):
    if n < 1 or radius <= 0:
        raise InvalidInput("need n >= 1 and radius > 0")
    b = space.flat_index(basepoint)
    d0 = grid_distances_from(space, [b], reach)[0]
    cand = np.flatnonzero(d0 <= radius)
    pos = {int(k): i for i, k in enumerate(cand)}

    def dist_from(i):
        return grid_distances_from(space, [cand[i]], reach)[0][cand]

    chosen, rows = _farthest_point(dist_from, len(cand), pos[b], n)
    d = rows[:, chosen]
    d = np.minimum(d, d.T)
    X, Y = space.coords()
    pts = np.column_stack([X.ravel()[cand[chosen]], Y.ravel()[cand[chosen]]])
    return FiniteMetricSpace(d, 0, points=pts, short=len(chosen) < n,
                             meta={"source": "grid", "radius": radius})


@sample_fms.register
def _(space: RadialProfile, basepoint, radius, n, h=None, reach=DEFAULT_REACH):
    # resample on a Cartesian chart large enough to hold the ball
    bx, by = (0.0, 0.0) if basepoint in ("inner", "apex", None) else basepoint
    extent = float(np.hypot(bx, by)) + _chart_radius_for(space, radius)
    h = h or extent / 60
    grid = space.to_grid(h, extent)
    return sample_fms(grid, grid.nearest_node(bx, by), radius, n, reach=reach)


def _chart_radius_for(profile, radius):
    pos = profile.meridian_positions()
    i = int(np.searchsorted(pos, 2 * radius))
    return float(profile.r[min(i, profile.n - 1)])


def _sample_analytic(space, basepoint, radius, n, rings=None):
    if not hasattr(space, "pairwise"):
        raise InvalidInput(f"cannot sample {type(space).__name__}")
    if n < 1 or radius <= 0:
        raise InvalidInput("need n >= 1 and radius > 0")
    bp = np.asarray(basepoint if basepoint is not None else (0.0, 0.0), float)
    reach = float(bp[0]) + radius
    rings = rings or max(8, int(np.ceil(2 * np.sqrt(n))) + 4)
    # candidate lattice about the distinguished point, dense enough for the ball
    step = radius / rings
    cand = polar_pattern(step * int(np.ceil(reach / step)), int(np.ceil(reach / step)))
    d0 = space.pairwise(bp[None, :], cand)[0]
    keep = (d0 <= radius) & (d0 > 0)
    cand = np.vstack([bp[None, :], cand[keep]])

    cache = {}

    def dist_from(i):
        if i not in cache:
            cache[i] = space.pairwise(cand[i][None, :], cand)[0]
        return cache[i]

    chosen, _ = _farthest_point(dist_from, len(cand), 0, n)
    pts = cand[chosen]
    d = metric_closure(space.pairwise(pts))
    return FiniteMetricSpace(d, 0, points=pts, short=len(chosen) < n,
                             meta={"source": type(space).__name__, "radius": radius})


def sample_pattern(space, points, basepoint=0):
    """FMS on prescribed polar points (shared layouts make index maps meaningful)."""
    pts = np.asarray(points, float)
    d = metric_closure(space.pairwise(pts))
    return FiniteMetricSpace(d, basepoint, points=pts,
                             meta={"source": type(space).__name__})


__all__ = ["gauss_curvature", "area", "distance", "ball_area", "sample_fms",
           "sample_pattern", "grid_ball_areas", "ball_truncated", "TruncatedBallWarning",
           "ConeSpace", "SmoothedCone", "SpaceForm"]
