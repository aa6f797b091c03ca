"""Rotationally symmetric metrics stored as 1D conformal profiles.

A profile holds u(r) for the metric e^{2u}(dr^2 + r^2 dθ^2).  Internally
everything is expressed in the log coordinate s = ln r, where the metric
becomes e^{2w}(ds^2 + dθ^2) with w = u + s.  The log chart is itself flat,
so curvature, area and meridian length reduce to 1D sums over s.

Each end of the node range is closed in one of two ways:

* ``"pole"`` / ``"cone"``: the profile continues past the last node as
  w = w_end + k*(s - s_end) (slope k = 1 for a smooth point, k = c for a
  cone vertex of angle 2πc).  The tail is integrated exactly.
* ``"boundary"``: the last node is a chart boundary; nothing lies beyond it.

A sphere is a profile on (0, ∞) with both ends closed.  The north chart is
obtained by the inversion r -> 1/r with u_N(1/r) = u(r) + 2 ln r.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInput

TOPOLOGIES = ("plane-chart", "sphere-double-chart")
END_KINDS = ("pole", "cone", "boundary")

# nodes whose area density is below this fraction of the peak are too
# degenerate for a stable curvature quotient
CURVATURE_CUTOFF = 1e-10


def _logmean(a, b):
    """(a - b)/(ln a - ln b), with the a == b limit handled."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (a - b) / (np.log(a) - np.log(b))
    close = np.abs(a - b) <= 1e-8 * np.maximum(a, b)
    return np.where(close, 0.5 * (a + b), out)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    r: np.ndarray
    u: np.ndarray
    topology: str = "plane-chart"
    inner: str = "pole"
    outer: str | None = None
    cone_slope: float = 1.0
    _cache: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        r = np.array(self.r, dtype=float)
        u = np.array(self.u, dtype=float)
        if r.ndim != 1 or u.shape != r.shape:
            raise InvalidInput("r and u must be 1D arrays of equal length")
        if r.size < 3:
            raise InvalidInput("a profile needs at least 3 nodes")
        if not np.all(r > 0) or not np.all(np.diff(r) > 0):
            raise InvalidInput("r nodes must be positive and strictly increasing")
        if not np.all(np.isfinite(u)):
            raise InvalidInput("u must be finite at every node")
        if self.topology not in TOPOLOGIES:
            raise InvalidInput(f"unknown topology {self.topology!r}")
        outer = self.outer or ("pole" if self.topology == "sphere-double-chart" else "boundary")
        if self.inner not in END_KINDS or outer not in END_KINDS:
            raise InvalidInput("end kinds must be pole, cone or boundary")
        if outer == "cone":
            raise InvalidInput("cone closures are supported at the inner end only")
        if self.topology == "sphere-double-chart" and (self.inner == "boundary" or outer == "boundary"):
            raise InvalidInput("a sphere profile must be closed at both ends")
        if not 0 < self.cone_slope <= 1:
            raise InvalidInput("cone slope must lie in (0, 1]")
        r.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "cone_slope", float(self.cone_slope))

    # log-coordinate view
    @property
    def s(self):
        return np.log(self.r)

    @property
    def w(self):
        return self.u + self.s

    @property
    def n(self):
        return self.r.size

    @property
    def inner_slope(self):
        return {"pole": 1.0, "cone": self.cone_slope, "boundary": None}[self.inner]

    @property
    def outer_slope(self):
        return None if self.outer == "boundary" else 1.0

    def with_u(self, u):
        return RadialProfile(self.r, u, self.topology, self.inner, self.outer, self.cone_slope)

    def shifted(self, c):
        return self.with_u(self.u + c)

    def with_w(self, w):
        return self.with_u(np.asarray(w) - self.s)

    def masses(self):
        """Finite-volume weights in s, including exact tail integrals at closed ends.

        Area is 2π Σ m_i e^{2 w_i}.
        """
        if "masses" in self._cache:
            return self._cache["masses"]
        s = self.s
        gaps = np.diff(s)
        m = np.zeros(self.n)
        m[1:] += 0.5 * gaps
        m[:-1] += 0.5 * gaps
        k = self.inner_slope
        if k is not None:
            m[0] = np.exp(k * gaps[0]) / (2 * k)
        k = self.outer_slope
        if k is not None:
            m[-1] = np.exp(k * gaps[-1]) / (2 * k)
        m.setflags(write=False)
        self._cache["masses"] = m
        return m

    def closure_flux(self):
        """Constant flux terms b from the closed ends (b = -k at each closed end)."""
        b = np.zeros(self.n)
        if self.inner_slope is not None:
            b[0] = -self.inner_slope
        if self.outer_slope is not None:
            b[-1] = -self.outer_slope
        return b

    def stiffness_apply(self, w):
        """(A w)_i = Σ_j (w_j - w_i)/|s_j - s_i| over the two neighbours."""
        g = np.diff(w) / np.diff(self.s)
        out = np.zeros_like(w)
        out[:-1] += g
        out[1:] -= g
        return out

    def boundary_nodes(self):
        mask = np.zeros(self.n, bool)
        if self.inner == "boundary":
            mask[0] = True
        if self.outer == "boundary":
            mask[-1] = True
        return mask

    def curvature(self):
        w = self.w
        v = np.exp(2 * w)
        K = -(self.stiffness_apply(w) + self.closure_flux()) / (self.masses() * v)
        K[self.boundary_nodes()] = np.nan
        K[v < CURVATURE_CUTOFF * v.max()] = np.nan
        return K

    def total_area(self):
        south, north = self.chart_areas()
        return south + north

    def chart_areas(self):
        """Area split between the south (r < 1) and north (r > 1) charts.

        Uses a smooth partition of unity in s; for a plane chart the north
        share is simply the part of the chart outside r = 1.
        """
        dens = 2 * np.pi * self.masses() * np.exp(2 * self.w)
        phi_north = 0.5 * (1 + np.tanh(self.s))
        north = float(np.sum(dens * phi_north))
        south = float(np.sum(dens * (1 - phi_north)))
        return south, north

    def area(self, region=None):
        """Area of the nodes selected by ``region`` (mask or predicate of r)."""
        dens = 2 * np.pi * self.masses() * np.exp(2 * self.w)
        if region is None:
            return float(np.sum(dens))
        sel = region(self.r) if callable(region) else region
        sel = np.asarray(sel, bool)
        if sel.shape != dens.shape or not sel.any():
            raise InvalidInput("empty region")
        return float(np.sum(dens[sel]))

    def inverted(self):
        """The same surface in the inverted chart r -> 1/r."""
        if self.inner == "cone":
            raise InvalidInput("profiles with a cone vertex cannot be inverted")
        r = 1.0 / self.r[::-1]
        u = (self.u + 2 * self.s)[::-1]
        return RadialProfile(r, u, self.topology, self.outer, self.inner)

    # meridian geometry
    def meridian_positions(self):
        """Arc length from the inner end point to each node along a meridian."""
        if "arc" in self._cache:
            return self._cache["arc"]
        w = self.w
        ew = np.exp(w)
        cell = np.diff(self.s) * _logmean(ew[1:], ew[:-1])
        start = 0.0 if self.inner_slope is None else ew[0] / self.inner_slope
        pos = np.concatenate([[start], start + np.cumsum(cell)])
        pos.setflags(write=False)
        self._cache["arc"] = pos
        return pos

    def meridian_length(self):
        pos = self.meridian_positions()
        tail = 0.0 if self.outer_slope is None else np.exp(self.w[-1]) / self.outer_slope
        return float(pos[-1] + tail)

    def position(self, p):
        """Arc-length coordinate of a node index or of an end point ("inner"/"outer")."""
        if isinstance(p, str):
            if p in ("inner", "apex"):
                return 0.0
            if p == "outer":
                if self.outer == "boundary":
                    return float(self.meridian_positions()[-1])
                return self.meridian_length()
            raise InvalidInput(f"unknown profile point {p!r}")
        i = int(p)
        if not 0 <= i < self.n:
            raise InvalidInput(f"node {p} outside the profile")
        return float(self.meridian_positions()[i])

    def distance(self, p, q):
        """Meridian distance between two points on a common meridian."""
        return abs(self.position(p) - self.position(q))

    def ball_area(self, rho):
        """Exact area of the geodesic ball of radius rho about the inner end point.

        Treats w as piecewise linear in s, which is the same interpolation the
        meridian arc lengths use.
        """
        if self.inner_slope is None:
            raise InvalidInput("ball about the inner end needs a closed inner end")
        rho = float(rho)
        if rho < 0:
            raise InvalidInput("radius must be nonnegative")
        pos = self.meridian_positions()
        w = self.w
        k = self.inner_slope
        if rho <= pos[0]:
            return float(np.pi * k * rho**2)
        total = np.pi * np.exp(2 * w[0]) / k
        ds = np.diff(self.s)
        for i in range(self.n - 1):
            g = (w[i + 1] - w[i]) / ds[i]
            x_end = ds[i]
            if rho < pos[i + 1]:
                # solve e^{w_i}(e^{g x} - 1)/g = rho - pos[i] for x
                y = (rho - pos[i]) * np.exp(-w[i])
                x = y if abs(g) < 1e-12 else np.log1p(g * y) / g
                x_end = x
            if abs(g) < 1e-12:
                total += 2 * np.pi * np.exp(2 * w[i]) * x_end
            else:
                total += np.pi * np.exp(2 * w[i]) * np.expm1(2 * g * x_end) / g
            if rho < pos[i + 1]:
                return float(total)
        if self.outer_slope is not None:
            k = self.outer_slope
            rest = rho - pos[-1]
            tail_len = np.exp(w[-1]) / k
            if rest >= tail_len:
                return float(total + np.pi * np.exp(2 * w[-1]) / k)
            # the tail is a cap closing like w = w_end - k x: e^{w} = e^{w_end} - k*dist
            e0 = np.exp(w[-1])
            e1 = e0 - k * rest
            return float(total + np.pi * (e0**2 - e1**2) / k)
        return float(total)

    # chart-level helpers
    def chart_disc_area(self, rho):
        """Area of the chart disc {r < rho}."""
        s = np.log(rho)
        sn = self.s
        w = self.w
        if self.inner_slope is None and rho < self.r[0]:
            raise InvalidInput("chart radius below the first node of an open profile")
        k = self.inner_slope
        if s <= sn[0]:
            return float(np.pi * np.exp(2 * (w[0] + k * (s - sn[0]))) / k)
        total = 0.0 if k is None else np.pi * np.exp(2 * w[0]) / k
        for i in range(self.n - 1):
            hi = min(s, sn[i + 1])
            g = (w[i + 1] - w[i]) / (sn[i + 1] - sn[i])
            x = hi - sn[i]
            if abs(g) < 1e-12:
                total += 2 * np.pi * np.exp(2 * w[i]) * x
            else:
                total += np.pi * np.exp(2 * w[i]) * np.expm1(2 * g * x) / g
            if s <= sn[i + 1]:
                return float(total)
        return float(total)

    def factor_at(self, rr):
        """Interpolated conformal factor u at chart radii rr (linear in s for w)."""
        rr = np.asarray(rr, float)
        s = np.log(np.maximum(rr, 1e-300))
        sn, w = self.s, self.w
        wi = np.interp(s, sn, w)
        if self.inner_slope is not None:
            lo = s < sn[0]
            wi = np.where(lo, w[0] + self.inner_slope * (s - sn[0]), wi)
        if self.outer_slope is not None:
            hi = s > sn[-1]
            wi = np.where(hi, w[-1] - self.outer_slope * (s - sn[-1]), wi)
        return wi - s

    def to_grid(self, h, extent):
        """Sample the profile on a Cartesian chart covering [-extent, extent]^2.

        The origin node carries the mean density of a chart disc of area h^2,
        which keeps cone vertices finite.
        """
        from .grid import ConformalGrid

        rmax = self.r[-1] if self.outer == "boundary" else np.inf
        if extent > rmax * (1 + 1e-12) and self.outer == "boundary":
            region = lambda X, Y: np.hypot(X, Y) <= rmax
        else:
            region = None

        def f(X, Y):
            R = np.hypot(X, Y)
            out = self.factor_at(np.where(R > 0, R, 1.0))
            if np.any(R == 0):
                a = self.chart_disc_area(h / np.sqrt(np.pi))
                out = np.where(R == 0, 0.5 * np.log(a / h**2), out)
            return out

        return ConformalGrid.from_function(f, h, (-extent, extent), (-extent, extent),
                                           "plane", region)


def log_nodes(s_min, s_max, n):
    """Chart radii e^{s} for n equally spaced log coordinates."""
    return np.exp(np.linspace(s_min, s_max, n))
