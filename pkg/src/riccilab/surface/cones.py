"""Exact model spaces with closed-form geometry.

Points are given in geodesic polar coordinates (rho, theta) about the
distinguished point (cone vertex, cap tip, or origin of a space form), with
theta in [0, 2π) measuring the fraction of the full turn.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from ..errors import InvalidInput


def _polar(p):
    rho, theta = float(p[0]), float(p[1])
    if rho < 0 or not np.isfinite(rho):
        raise InvalidInput("radial coordinate must be nonnegative")
    return rho, theta


def _angle_gap(theta1, theta2):
    """Turn difference folded into [0, π]."""
    d = np.mod(np.abs(np.asarray(theta1) - np.asarray(theta2)), 2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)


@dataclass(frozen=True)
class ConeSpace:
    """Metric cone dr^2 + c^2 r^2 dθ^2 with total angle 2πc."""

    c: float

    def __post_init__(self):
        if not (0 < self.c <= 1):
            raise InvalidInput(f"cone constant must lie in (0, 1], got {self.c}")

    def distance(self, p, q):
        return cone_distance(self, p, q)

    def pairwise(self, P, Q=None):
        P = np.asarray(P, float)
        Q = P if Q is None else np.asarray(Q, float)
        r1 = P[:, 0][:, None]
        r2 = Q[:, 0][None, :]
        phi = self.c * _angle_gap(P[:, 1][:, None], Q[:, 1][None, :])
        d2 = r1**2 + r2**2 - 2 * r1 * r2 * np.cos(phi)
        return np.sqrt(np.maximum(d2, 0.0))

    def ball_area(self, center, rho):
        """Area of B(center, rho), integrated exactly in the unrolled cone."""
        R1, _ = _polar(center)
        rho = float(rho)
        c = self.c
        if rho <= 0:
            return 0.0
        if R1 == 0:
            return np.pi * c * rho**2
        half = np.pi * c

        def width(R):
            if R <= 0:
                return 0.0
            C = (R * R + R1 * R1 - rho * rho) / (2 * R * R1)
            if C >= 1:
                return 0.0
            phi = np.pi if C <= -1 else np.arccos(C)
            return 2 * R * min(phi, half)

        lo, hi = max(0.0, R1 - rho), R1 + rho
        pts = []
        # kinks: where the angular window saturates at πc, and where C = -1
        disc = (R1 * np.cos(half)) ** 2 - (R1 * R1 - rho * rho)
        if disc >= 0:
            for root in (R1 * np.cos(half) - np.sqrt(disc), R1 * np.cos(half) + np.sqrt(disc)):
                if lo < root < hi:
                    pts.append(root)
        if lo < rho - R1 < hi:
            pts.append(rho - R1)
        val, _ = integrate.quad(width, lo, hi, points=sorted(pts) or None,
                                limit=200, epsabs=1e-13, epsrel=1e-12)
        return float(val)

    def radial_profile_slope(self):
        return self.c


def cone_distance(cone: ConeSpace, p, q) -> float:
    """Distance on the cone between polar points (r, θ)."""
    if not isinstance(cone, ConeSpace):
        cone = ConeSpace(float(cone))
    r1, t1 = _polar(p)
    r2, t2 = _polar(q)
    phi = cone.c * float(_angle_gap(t1, t2))
    return float(np.sqrt(max(r1 * r1 + r2 * r2 - 2 * r1 * r2 * np.cos(phi), 0.0)))


@dataclass(frozen=True)
class SpaceForm:
    """Simply connected constant-curvature surface (curvature kappa)."""

    kappa: float = 0.0

    @property
    def diameter(self):
        return np.pi / np.sqrt(self.kappa) if self.kappa > 0 else np.inf

    def pairwise(self, P, Q=None):
        P = np.asarray(P, float)
        Q = P if Q is None else np.asarray(Q, float)
        r1 = P[:, 0][:, None]
        r2 = Q[:, 0][None, :]
        gap = _angle_gap(P[:, 1][:, None], Q[:, 1][None, :])
        k = self.kappa
        if k == 0:
            return np.sqrt(np.maximum(r1**2 + r2**2 - 2 * r1 * r2 * np.cos(gap), 0.0))
        if k > 0:
            a = np.sqrt(k)
            cosd = np.cos(a * r1) * np.cos(a * r2) + np.sin(a * r1) * np.sin(a * r2) * np.cos(gap)
            return np.arccos(np.clip(cosd, -1, 1)) / a
        a = np.sqrt(-k)
        coshd = np.cosh(a * r1) * np.cosh(a * r2) - np.sinh(a * r1) * np.sinh(a * r2) * np.cos(gap)
        return np.arccosh(np.maximum(coshd, 1.0)) / a

    def distance(self, p, q):
        _polar(p), _polar(q)
        return float(self.pairwise([p], [q])[0, 0])

    def ball_area(self, center, rho):
        rho = float(rho)
        k = self.kappa
        if k == 0:
            return np.pi * rho**2
        if k > 0:
            a = np.sqrt(k)
            return 2 * np.pi * (1 - np.cos(min(a * rho, np.pi))) / k
        a = np.sqrt(-k)
        return 2 * np.pi * (np.cosh(a * rho) - 1) / (-k)

    def curvature(self):
        return self.kappa


@dataclass(frozen=True)
class SmoothedCone:
    """Cone of angle 2πc whose tip is replaced by a tangent spherical cap.

    The cap is glued along the cone circle of radius ``delta`` (measured from
    the removed vertex); the cap sphere has radius a = c δ/√(1-c²) so the
    surface is C¹ with curvature 1/a² on the cap and 0 outside.  Points use
    polar coordinates (σ, θ) about the cap tip, σ being the distance to it.
    """

    c: float
    delta: float
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if not (0 < self.c < 1):
            raise InvalidInput("smoothed cones need 0 < c < 1")
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise InvalidInput("smoothing radius delta must be positive")

    @property
    def cap_radius(self):
        return self.c * self.delta / np.sqrt(1 - self.c**2)

    @property
    def seam_distance(self):
        """Distance from the tip to the gluing circle."""
        return self.cap_radius * np.arccos(self.c)

    @property
    def cap_angle(self):
        """Polar angle of the seam on the cap sphere."""
        return np.arccos(self.c)

    def _cone_radius(self, sigma):
        return sigma - self.seam_distance + self.delta

    def _split(self, P):
        P = np.asarray(P, float)
        return P[:, 0], P[:, 1]

    def _cap_pair(self, s1, t1, s2, t2):
        a = self.cap_radius
        x1, x2 = s1 / a, s2 / a
        cosd = np.cos(x1) * np.cos(x2) + np.sin(x1) * np.sin(x2) * np.cos(_angle_gap(t1, t2))
        return a * np.arccos(np.clip(cosd, -1, 1))

    def _cone_chord(self, R1, t1, R2, t2):
        phi = self.c * _angle_gap(t1, t2)
        return np.sqrt(np.maximum(R1**2 + R2**2 - 2 * R1 * R2 * np.cos(phi), 0.0))

    def _chord_clears_cap(self, R1, t1, R2, t2):
        """True when the unrolled straight chord stays outside the cap."""
        phi = self.c * _angle_gap(t1, t2)
        d = self._cone_chord(R1, t1, R2, t2)
        with np.errstate(divide="ignore", invalid="ignore"):
            # foot of the perpendicular from the vertex to the chord
            dot1 = R1 * (R1 - R2 * np.cos(phi))
            dot2 = R2 * (R2 - R1 * np.cos(phi))
            perp = np.where(d > 0, R1 * R2 * np.sin(phi) / np.where(d > 0, d, 1), R1)
        closest = np.where((dot1 > 0) & (dot2 > 0), perp, np.minimum(R1, R2))
        return closest >= self.delta * (1 - 1e-12)

    def _seam_grid(self, m=720):
        key = ("seam", m)
        if key not in self._cache:
            alpha = np.linspace(0, 2 * np.pi, m, endpoint=False)
            st = np.full(m, self.seam_distance)
            cap = self._cap_pair(st[:, None], alpha[:, None], st[None, :], alpha[None, :])
            self._cache[key] = (alpha, cap)
        return self._cache[key]

    def _to_seam(self, sigma, theta, alpha):
        """Distance from a point to seam points at turn angles alpha."""
        if sigma <= self.seam_distance:
            return self._cap_pair(sigma, theta, self.seam_distance, alpha)
        R = self._cone_radius(sigma)
        d = self._cone_chord(R, theta, self.delta, alpha)
        ok = R * np.cos(self.c * _angle_gap(theta, alpha)) >= self.delta * (1 - 1e-12)
        return np.where(ok, d, np.inf)

    def _distance_pair(self, p, q, polish=True):
        s1, t1 = p
        s2, t2 = q
        st = self.seam_distance
        if s1 <= st and s2 <= st:
            return float(self._cap_pair(s1, t1, s2, t2))
        best = np.inf
        if s1 > st and s2 > st:
            R1, R2 = self._cone_radius(s1), self._cone_radius(s2)
            if self._chord_clears_cap(R1, t1, R2, t2):
                best = float(self._cone_chord(R1, t1, R2, t2))
        alpha, cap = self._seam_grid()
        g1 = self._to_seam(s1, t1, alpha)
        g2 = self._to_seam(s2, t2, alpha)
        if s1 <= st or s2 <= st:
            # one point in the cap: a single seam crossing
            inner, outer = ((s1, t1), g2) if s1 <= st else ((s2, t2), g1)
            tot = self._cap_pair(inner[0], inner[1], st, alpha) + outer
            i = int(np.argmin(tot))
            val = float(tot[i])
            if polish and np.isfinite(val):
                f = lambda a: float(self._cap_pair(inner[0], inner[1], st, a)
                                    + self._to_seam(*((s2, t2) if s1 <= st else (s1, t1)), a))
                res = optimize.minimize_scalar(f, bracket=None, bounds=(alpha[i] - 0.01, alpha[i] + 0.01),
                                               method="bounded", options={"xatol": 1e-12})
                val = min(val, float(res.fun))
            return min(best, val)
        tot = g1[:, None] + cap + g2[None, :]
        i, j = np.unravel_index(np.argmin(tot), tot.shape)
        val = float(tot[i, j])
        if polish and np.isfinite(val):
            def f(x):
                return float(self._to_seam(s1, t1, x[0]) + self._cap_pair(st, x[0], st, x[1])
                             + self._to_seam(s2, t2, x[1]))
            res = optimize.minimize(f, [alpha[i], alpha[j]], method="Nelder-Mead",
                                    options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": 2000})
            if np.isfinite(res.fun):
                val = min(val, float(res.fun))
        return min(best, val)

    def distance(self, p, q):
        return self._distance_pair(_polar(p), _polar(q))

    def _seam_table(self, P, m):
        """Distances from each point to the m seam grid points (inf where no straight route)."""
        alpha, _ = self._seam_grid(m)
        G = np.empty((len(P), m))
        for i, (s, t) in enumerate(P):
            G[i] = self._to_seam(s, t, alpha)
        return G

    def pairwise(self, P, Q=None, polish=False, m=1440):
        """Distance matrix between point sets.

        Seam crossings are minimized over a grid of m seam angles (error of
        order δ/m²); ``polish`` refines every pair with a continuous search.
        """
        P = np.asarray(P, float).reshape(-1, 2)
        sym = Q is None
        Q = P if sym else np.asarray(Q, float).reshape(-1, 2)
        if polish:
            out = np.zeros((len(P), len(Q)))
            for i in range(len(P)):
                for j in range(len(Q)):
                    if sym and j < i:
                        out[i, j] = out[j, i]
                    elif not (sym and j == i):
                        out[i, j] = self._distance_pair(tuple(P[i]), tuple(Q[j]))
            return out
        st = self.seam_distance
        _, cap = self._seam_grid(m)
        GP = self._seam_table(P, m)
        GQ = GP if sym else self._seam_table(Q, m)
        out = np.empty((len(P), len(Q)))
        sq, tq = Q[:, 0], Q[:, 1]
        in_cap_q = sq <= st
        Rq = self._cone_radius(sq)
        for i, (s, t) in enumerate(P):
            if s <= st:
                H = GP[i]
            else:
                H = np.min(GP[i][:, None] + cap, axis=0)
            row = np.min(H[None, :] + GQ, axis=1)
            if s <= st:
                direct = self._cap_pair(s, t, sq, tq)
                row = np.where(in_cap_q, np.minimum(row, direct), row)
            else:
                R = self._cone_radius(s)
                ok = ~in_cap_q & self._chord_clears_cap(R, t, Rq, tq)
                chord = self._cone_chord(R, t, Rq, tq)
                row = np.where(ok, np.minimum(row, chord), row)
            out[i] = row
        if sym:
            out = np.minimum(out, out.T)
            np.fill_diagonal(out, 0.0)
        return out

    def ball_area(self, center, rho):
        """Area of the ball about the tip (only the tip is supported)."""
        sig, _ = _polar(center)
        if sig != 0:
            raise InvalidInput("smoothed-cone ball areas are available about the tip only")
        rho = float(rho)
        a = self.cap_radius
        st = self.seam_distance
        if rho <= st:
            return 2 * np.pi * a * a * (1 - np.cos(rho / a))
        cap = 2 * np.pi * a * a * (1 - self.c)
        R = self._cone_radius(rho)
        return cap + np.pi * self.c * (R * R - self.delta**2)


def polar_pattern(radius, rings, spokes0=6):
    """Deterministic polar point set: origin plus rings k·radius/rings with spokes0·k points.

    Returns an (n, 2) array of (rho, theta).
    """
    pts = [(0.0, 0.0)]
    for k in range(1, rings + 1):
        m = spokes0 * k
        rho = radius * k / rings
        for j in range(m):
            pts.append((rho, 2 * np.pi * j / m))
    return np.array(pts)
