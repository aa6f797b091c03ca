"""Structured conformal charts: metric e^{2u}(dx^2 + dy^2) sampled on a grid."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from ..errors import InvalidInput, NoPath

CHART_KINDS = ("plane", "disc", "annulus", "sphere-stereographic")

# Stencil reach of the shortest-path graph: neighbours (a, b) with
# max(|a|, |b|) <= reach and gcd(a, b) = 1.  reach=1 is the 8-neighbour graph.
DEFAULT_REACH = 3


def _frozen(a):
    a = np.array(a, dtype=float if a.dtype != bool else bool, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ConformalGrid:
    """Conformal factor ``u`` on an ``nx x ny`` node lattice with spacing ``h``.

    ``u[i, j]`` lives at chart point ``(origin[0] + i*h, origin[1] + j*h)``.
    ``domain`` selects the nodes that belong to the chart region (a disc
    inside its bounding box, say); ``u`` may be NaN outside it.  Boundary
    nodes are domain nodes without a full 5-point stencil inside the domain.
    """

    u: np.ndarray
    h: float
    origin: tuple = (0.0, 0.0)
    chart_kind: str = "plane"
    domain: np.ndarray | None = None
    boundary_mask: np.ndarray = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 2:
            raise InvalidInput("u must be a 2D array")
        if not (np.isfinite(self.h) and self.h > 0):
            raise InvalidInput(f"spacing h must be positive, got {self.h}")
        if self.chart_kind not in CHART_KINDS:
            raise InvalidInput(f"unknown chart kind {self.chart_kind!r}")
        dom = np.ones(u.shape, bool) if self.domain is None else np.asarray(self.domain, bool)
        if dom.shape != u.shape:
            raise InvalidInput("domain mask shape does not match u")
        if not dom.any():
            raise InvalidInput("empty chart domain")
        if not np.all(np.isfinite(u[dom])):
            raise InvalidInput("u must be finite at every domain node")
        padded = np.pad(dom, 1)
        full = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "domain", _frozen(dom))
        object.__setattr__(self, "boundary_mask", _frozen(dom & ~full))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def from_function(cls, func, h, xlim, ylim, chart_kind="plane", region=None):
        """Sample ``func(x, y)`` on the lattice covering ``xlim x ylim``.

        ``region(x, y)`` (optional) returns the domain mask.
        """
        nx = int(round((xlim[1] - xlim[0]) / h)) + 1
        ny = int(round((ylim[1] - ylim[0]) / h)) + 1
        x = xlim[0] + h * np.arange(nx)
        y = ylim[0] + h * np.arange(ny)
        X, Y = np.meshgrid(x, y, indexing="ij")
        dom = np.ones(X.shape, bool) if region is None else np.asarray(region(X, Y), bool)
        with np.errstate(all="ignore"):
            u = np.where(dom, func(X, Y), np.nan)
        return cls(u, h, (xlim[0], ylim[0]), chart_kind, dom)

    @property
    def width(self):
        return self.u.shape[0]

    @property
    def height(self):
        return self.u.shape[1]

    @property
    def shape(self):
        return self.u.shape

    @property
    def x(self):
        return self.origin[0] + self.h * np.arange(self.width)

    @property
    def y(self):
        return self.origin[1] + self.h * np.arange(self.height)

    def coords(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def interior_mask(self):
        return self.domain & ~self.boundary_mask

    def flat_index(self, p):
        if isinstance(p, (tuple, list, np.ndarray)) and len(p) == 2:
            i, j = int(p[0]), int(p[1])
            if not (0 <= i < self.width and 0 <= j < self.height):
                raise InvalidInput(f"node {p} outside the grid")
            return i * self.height + j
        k = int(p)
        if not 0 <= k < self.u.size:
            raise InvalidInput(f"node {p} outside the grid")
        return k

    def node(self, k):
        return divmod(int(k), self.height)

    def nearest_node(self, x, y):
        i = int(np.clip(np.rint((x - self.origin[0]) / self.h), 0, self.width - 1))
        j = int(np.clip(np.rint((y - self.origin[1]) / self.h), 0, self.height - 1))
        return i, j

    def with_u(self, u):
        """Same node layout, new conformal factor."""
        return ConformalGrid(np.where(self.domain, u, np.nan), self.h, self.origin,
                             self.chart_kind, self.domain)

    def shifted(self, c):
        """Add the constant ``c`` to u (metric scaled by e^{2c})."""
        return self.with_u(self.u + c)


def laplacian(grid: ConformalGrid) -> np.ndarray:
    """Five-point Laplacian of u; NaN where the stencil is incomplete."""
    u = grid.u
    lap = np.full(u.shape, np.nan)
    c = u[1:-1, 1:-1]
    lap[1:-1, 1:-1] = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4 * c) / grid.h**2
    lap[~grid.interior_mask] = np.nan
    return lap


def grid_curvature(grid: ConformalGrid) -> np.ndarray:
    if grid.width < 3 or grid.height < 3:
        raise InvalidInput("curvature needs at least a 3x3 grid")
    return -np.exp(-2 * grid.u) * laplacian(grid)


def grid_area(grid: ConformalGrid, region=None) -> float:
    mask = grid.domain.copy()
    if region is not None:
        if callable(region):
            X, Y = grid.coords()
            sel = np.asarray(region(X, Y), bool)
        else:
            sel = np.asarray(region, bool)
            if sel.shape != grid.shape:
                raise InvalidInput("region mask shape does not match the grid")
        mask &= sel
    if not mask.any():
        raise InvalidInput("empty region")
    return float(np.sum(np.exp(2 * grid.u[mask])) * grid.h**2)


def stencil_offsets(reach: int):
    """Half-plane offsets of the shortest-path stencil (each undirected edge once)."""
    if reach < 1:
        raise InvalidInput("reach must be >= 1")
    out = []
    for a in range(-reach, reach + 1):
        for b in range(0, reach + 1):
            if b == 0 and a <= 0:
                continue
            if gcd(abs(a), b) == 1:
                out.append((a, b))
    return out


def grid_graph(grid: ConformalGrid, reach: int = DEFAULT_REACH):
    """Sparse undirected graph with edge length e^{(u_a+u_b)/2} * |edge|."""
    key = ("graph", reach)
    if key in grid._cache:
        return grid._cache[key]
    nx, ny = grid.shape
    dom = grid.domain
    u = np.where(dom, grid.u, 0.0)
    idx = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []
    for a, b in stencil_offsets(reach):
        i0, i1 = max(0, -a), min(nx, nx - a)
        j0, j1 = 0, ny - b
        if i1 <= i0 or j1 <= j0:
            continue
        src = (slice(i0, i1), slice(j0, j1))
        dst = (slice(i0 + a, i1 + a), slice(j0 + b, j1 + b))
        ok = dom[src] & dom[dst]
        # long edges must not jump across nodes outside the domain: every
        # lattice node adjacent to the segment has to belong to it
        n = max(abs(a), b)
        for k in range(1, n):
            pi, pj = a * k / n, b * k / n
            for di in {int(np.floor(pi)), int(np.ceil(pi))}:
                for dj in {int(np.floor(pj)), int(np.ceil(pj))}:
                    ok &= dom[i0 + di:i1 + di, j0 + dj:j1 + dj]
        length = grid.h * np.hypot(a, b)
        rows.append(idx[src][ok])
        cols.append(idx[dst][ok])
        vals.append(length * np.exp(0.5 * (u[src][ok] + u[dst][ok])))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    g = sp.csr_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny))
    grid._cache[key] = g
    return g


def grid_distances_from(grid: ConformalGrid, sources, reach: int = DEFAULT_REACH) -> np.ndarray:
    """Shortest-path distances from each source node to every node (flat order)."""
    src = [grid.flat_index(s) for s in sources]
    for k in src:
        if not grid.domain.flat[k]:
            raise InvalidInput(f"node {grid.node(k)} is outside the chart domain")
    g = grid_graph(grid, reach)
    d = csgraph.dijkstra(g, directed=False, indices=src)
    d = np.atleast_2d(d)
    d[:, ~grid.domain.ravel()] = np.inf
    return d


def grid_distance(grid: ConformalGrid, p, q, reach: int = DEFAULT_REACH) -> float:
    # search from the lower index so d(p, q) and d(q, p) round identically
    a, b = sorted((grid.flat_index(p), grid.flat_index(q)))
    d = grid_distances_from(grid, [a], reach)[0, b]
    if not np.isfinite(d):
        raise NoPath(f"no path between {p} and {q}")
    return float(d)
