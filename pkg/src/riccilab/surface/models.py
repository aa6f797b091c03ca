"""Closed-form model metrics and their discretizations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInput
from .grid import ConformalGrid
from .radial import RadialProfile, log_nodes

MODEL_KINDS = ("flat", "round-sphere", "poincare-disc", "hyperbolic-cusp",
               "cone-smoothed", "thin-cylinder")


def thin_cylinder_radius(area=None, circumference=None, length=2.0):
    """Tube radius for a capped cylinder, from its circumference or total area.

    The surface is a tube of the given length closed by two hemispheres, so
    area = 2π ρ L + 4π ρ².
    """
    if circumference is not None:
        rho = circumference / (2 * np.pi)
    elif area is not None:
        # 4π ρ² + 2π L ρ - area = 0
        rho = (-2 * np.pi * length + np.sqrt((2 * np.pi * length) ** 2 + 16 * np.pi * area)) / (8 * np.pi)
    else:
        raise InvalidInput("thin cylinder needs a circumference or a total area")
    if not rho > 0:
        raise InvalidInput("thin cylinder circumference must be positive")
    return float(rho)


@dataclass(frozen=True)
class ModelMetric:
    """A named model surface with analytic conformal factor.

    Radial kinds expose ``w(s)`` in log coordinates; every kind exposes
    ``u(x, y)`` on its natural chart.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidInput(f"unknown model kind {self.kind!r}")
        p = dict(self.params)
        k = self.kind
        if k == "round-sphere":
            p.setdefault("radius", 1.0)
            if p["radius"] <= 0:
                raise InvalidInput("sphere radius must be positive")
        elif k == "cone-smoothed":
            p.setdefault("c", 0.7)
            p.setdefault("delta", 0.1)
            if not 0 < p["c"] < 1:
                raise InvalidInput("cone constant must lie in (0, 1)")
            if not p["delta"] > 0:
                raise InvalidInput("cone smoothing delta must be positive")
        elif k == "thin-cylinder":
            p.setdefault("length", 2.0)
            if p["length"] <= 0:
                raise InvalidInput("cylinder length must be positive")
            if "epsilon" in p and "area" not in p:
                if p["epsilon"] <= 0:
                    raise InvalidInput("epsilon must be positive")
                p["area"] = 8 * np.pi * p["epsilon"]
            p["tube_radius"] = thin_cylinder_radius(p.get("area"), p.get("circumference"), p["length"])
            p["circumference"] = 2 * np.pi * p["tube_radius"]
        object.__setattr__(self, "params", p)

    @property
    def radial(self):
        return self.kind != "flat"

    # log-coordinate factors
    def w(self, s):
        s = np.asarray(s, float)
        p = self.params
        k = self.kind
        if k == "flat":
            return s
        if k == "round-sphere":
            return np.log(p["radius"]) - _logcosh(s)
        if k == "poincare-disc":
            if np.any(s >= 0):
                raise InvalidInput("Poincaré disc factor needs r < 1")
            return np.log(2.0) + s - np.log1p(-np.exp(2 * s))
        if k == "hyperbolic-cusp":
            if np.any(s >= 0):
                raise InvalidInput("cusp factor needs r < 1")
            return -np.log(-s)
        if k == "cone-smoothed":
            c, a = p["c"], self.cap_radius
            st, s0 = self.seam_s, self.cap_center_s
            return np.where(s <= st, np.log(a) - _logcosh(s - s0), np.log(c) + c * s)
        if k == "thin-cylinder":
            rho = p["tube_radius"]
            half = p["length"] / (2 * rho)
            return np.log(rho) - _logcosh(np.maximum(np.abs(s) - half, 0.0))
        raise AssertionError(k)

    def u_radial(self, r):
        r = np.asarray(r, float)
        return self.w(np.log(r)) - np.log(r)

    def u(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if self.kind == "flat":
            return np.zeros(np.broadcast(x, y).shape)
        r2 = x * x + y * y
        if self.kind == "round-sphere":
            return np.log(2 * self.params["radius"] / (1 + r2))
        if self.kind == "poincare-disc":
            return np.log(2 / (1 - r2))
        if self.kind == "cone-smoothed":
            c = self.params["c"]
            s0 = self.cap_center_s
            r = np.sqrt(r2)
            with np.errstate(divide="ignore"):
                cone = np.log(c) + (c - 1) * np.log(r)
            cap = np.log(2 * self.cap_radius) - s0 - np.log1p(r2 * np.exp(-2 * s0))
            return np.where(np.log(np.maximum(r, 1e-300)) <= self.seam_s, cap, cone)
        return self.u_radial(np.sqrt(r2))

    # smoothed-cone geometry
    @property
    def cap_radius(self):
        c, d = self.params["c"], self.params["delta"]
        return c * d / np.sqrt(1 - c * c)

    @property
    def seam_s(self):
        c, d = self.params["c"], self.params["delta"]
        return np.log(d) / c

    @property
    def cap_center_s(self):
        return self.seam_s + np.arctanh(self.params["c"])

    def exact_curvature(self, r):
        """Analytic Gauss curvature at chart radius r."""
        r = np.asarray(r, float)
        k = self.kind
        if k == "flat":
            return np.zeros_like(r)
        if k == "round-sphere":
            return np.full_like(r, 1 / self.params["radius"] ** 2)
        if k in ("poincare-disc", "hyperbolic-cusp"):
            return -np.ones_like(r)
        if k == "cone-smoothed":
            return np.where(np.log(r) <= self.seam_s, 1 / self.cap_radius**2, 0.0)
        rho = self.params["tube_radius"]
        return np.where(np.abs(np.log(r)) > self.params["length"] / (2 * rho), 1 / rho**2, 0.0)

    # discretizations
    def profile(self, n=None, s_range=None, ds=None, outer=None):
        """Radial discretization on equally spaced log coordinates."""
        k = self.kind
        p = self.params
        topo = "plane-chart"
        inner = "pole"
        if k == "flat":
            raise InvalidInput("flat model is discretized on a grid; use profile of a plane chart explicitly")
        if k == "round-sphere":
            s_range = s_range or (-6.0, 6.0)
            topo = "sphere-double-chart"
        elif k == "thin-cylinder":
            half = p["length"] / (2 * p["tube_radius"])
            s_range = s_range or (-(half + 6.0), half + 6.0)
            ds = ds if ds is not None or n is not None else 0.05
            topo = "sphere-double-chart"
        elif k == "poincare-disc":
            s_range = s_range or (-8.0, np.log(0.99))
        elif k == "hyperbolic-cusp":
            s_range = s_range or (-12.0, np.log(0.5))
            inner = "boundary"
        elif k == "cone-smoothed":
            lo = self.cap_center_s - 8.0
            s_range = s_range or (lo, np.log(p.get("extent", 4.0)) / p["c"])
        lo, hi = s_range
        if n is None:
            n = 2049 if ds is None else int(round((hi - lo) / ds)) + 1
        if n < 3 or not hi > lo:
            raise InvalidInput("profile needs n >= 3 and a nonempty s range")
        r = log_nodes(lo, hi, n)
        return RadialProfile(r, self.u_radial(r), topo, inner, outer)

    def grid(self, h=0.05, extent=None, xlim=None, ylim=None):
        """Cartesian discretization on the model's natural chart."""
        k = self.kind
        if k == "flat":
            xlim = xlim or (0.0, 1.0)
            ylim = ylim or xlim
            return ConformalGrid.from_function(lambda X, Y: np.zeros(X.shape), h, xlim, ylim, "plane")
        if k == "round-sphere":
            L = extent or 2.0
            return ConformalGrid.from_function(self.u, h, (-L, L), (-L, L), "sphere-stereographic")
        if k == "poincare-disc":
            L = 1.0
            return ConformalGrid.from_function(self.u, h, (-L, L), (-L, L), "disc",
                                               lambda X, Y: X * X + Y * Y < 1)
        if k == "hyperbolic-cusp":
            rmin = 0.05 if extent is None else extent
            return ConformalGrid.from_function(
                self.u, h, (-1, 1), (-1, 1), "annulus",
                lambda X, Y: (X * X + Y * Y < 1) & (X * X + Y * Y > rmin**2))
        if k == "cone-smoothed":
            L = extent or 2.0
            return self.profile().to_grid(h, L)
        L = extent or 2.0
        return ConformalGrid.from_function(self.u, h, (-L, L), (-L, L), "sphere-stereographic")


def _logcosh(x):
    x = np.abs(np.asarray(x, float))
    return x + np.log1p(np.exp(-2 * x)) - np.log(2.0)


def make_model(kind, params=None, chart=None, **disc):
    """Build a model metric and discretize it.

    ``chart`` is "grid" or "profile"; the default is the profile for radial
    kinds and the grid for the flat plane.  Extra keywords go to the
    discretization (``h``, ``extent`` for grids; ``n``, ``ds``, ``s_range``
    for profiles).
    """
    model = ModelMetric(kind, dict(params or {}))
    if chart is None:
        chart = "profile" if model.radial else "grid"
    if chart == "grid":
        return model.grid(**disc)
    if chart == "profile":
        return model.profile(**disc)
    raise InvalidInput(f"unknown chart {chart!r}")
