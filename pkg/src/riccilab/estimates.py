"""Checks of the quantitative inequalities satisfied by Ricci flows and model spaces.

Every check returns an EstimateReport whose ``passed`` flag is derived from
its margin: passed iff margin >= -tolerance.  Constants that the theory
only asserts to exist are fitted (minimal validating value) rather than
assumed.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, UndefinedAVR
from .io import json_text
from .surface.cones import ConeSpace, SmoothedCone, SpaceForm
from .surface.grid import ConformalGrid, grid_distances_from
from .surface.ops import TruncatedBallWarning, ball_area, distance, grid_ball_areas
from .surface.radial import RadialProfile

DIM = 2


@dataclass
class EstimateReport:
    check: str
    margin: float
    tolerance: float = 0.0
    constants: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    asserted: bool = True

    @property
    def passed(self) -> bool:
        return bool(self.margin >= -self.tolerance)

    def to_dict(self):
        return {"check": self.check, "pass": self.passed, "margin": self.margin,
                "tolerance": self.tolerance, "constants": self.constants,
                "witnesses": self.witnesses, "notes": list(self.notes),
                "asserted": self.asserted}

    def to_json(self):
        return json_text(self.to_dict())


# ball volumes
def _ball_areas(space, x0, radii):
    """Ball areas at several radii plus a per-radius discretization scale."""
    notes = []
    if isinstance(space, ConformalGrid):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", TruncatedBallWarning)
            vals = grid_ball_areas(space, x0, radii)
        if caught:
            notes.append("truncated ball: a radius reaches the chart boundary")
        return np.array(vals), np.full(len(radii), space.h), notes
    if isinstance(space, RadialProfile):
        if space.outer == "boundary" and max(radii) >= space.meridian_positions()[-1]:
            notes.append("truncated ball: a radius reaches the chart boundary")
        pos = space.meridian_positions()
        cells = np.diff(pos)
        scale = []
        for r in radii:
            inside = cells[: max(1, int(np.searchsorted(pos, r)))]
            scale.append(float(inside.max()) if inside.size else float(pos[0]))
        vals = [space.ball_area(r) for r in radii]
        return np.array(vals), np.array(scale), notes
    vals = [ball_area(space, x0, r) for r in radii]
    return np.array(vals), np.zeros(len(radii)), notes


def model_ball_area(kappa, r):
    """Ball area in the simply connected surface of curvature kappa."""
    return SpaceForm(kappa).ball_area((0.0, 0.0), r)


def _default_center(space):
    if isinstance(space, RadialProfile):
        return "inner"
    if isinstance(space, ConformalGrid):
        return space.nearest_node(0.0, 0.0)
    return (0.0, 0.0)


def check_bishop_gromov(space, x0=None, radii=(0.25, 0.5, 1.0), curvature_lower_bound=0.0,
                        rtol=None):
    """Monotonicity of r -> Vol B(x0, r) / V_λ(r) under the hypothesis K >= λ.

    With λ = 0 this is Vol B / (π r²).  Consecutive radii may increase the
    ratio by at most rtol_i = 2 h / r_i relative on grids (and the analogous
    meridian cell size on profiles); exact spaces use 1e-12.
    """
    radii = np.asarray(radii, float)
    if radii.size < 2 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise InvalidInput("radii must be positive and strictly increasing")
    x0 = _default_center(space) if x0 is None else x0
    vols, hscale, notes = _ball_areas(space, x0, radii)
    model = np.array([model_ball_area(curvature_lower_bound, r) for r in radii])
    ratio = vols / model
    if rtol is None:
        rtol = np.where(hscale > 0, 2 * hscale / radii, 1e-12)
    rtol = np.broadcast_to(np.asarray(rtol, float), radii.shape)
    rise = (ratio[1:] - ratio[:-1]) / ratio[:-1]
    slack = rtol[1:] - rise
    worst = int(np.argmin(slack))
    return EstimateReport(
        "bishop_gromov", float(slack[worst]), 0.0,
        constants={"curvature_lower_bound": curvature_lower_bound,
                   "radii": radii, "ball_areas": vols, "ratios": ratio * (np.pi if curvature_lower_bound == 0 else 1),
                   "ratio_kind": "Vol/r^2" if curvature_lower_bound == 0 else "Vol/V_model",
                   "relative_tolerance": rtol,
                   "small_ball_ratio": float(vols[0] / radii[0] ** 2),
                   "flat_ratio": np.pi},
        witnesses={"radius_pair": [float(radii[worst]), float(radii[worst + 1])],
                   "relative_rise": float(rise[worst])},
        notes=notes)


def nonconcentric_lower_bound(space, x0, x, r):
    """Vol B(x, r)/r² >= R^{-2} Vol B(x0, 1), R = r + 1 + d(x, x0) (nonnegative curvature)."""
    if r <= 0:
        raise InvalidInput("radius must be positive")
    d = float(distance(space, x0, x))
    R = r + 1 + d
    v1, _, n1 = _ball_areas(space, x0, [1.0])
    vr, _, n2 = _ball_areas(space, x, [r])
    lhs = vr[0] / r**2
    rhs = v1[0] / R**2
    return EstimateReport("nonconcentric_lower_bound", float((lhs - rhs) / rhs), 1e-12,
                          constants={"R": R, "lhs": lhs, "rhs": rhs, "distance": d},
                          notes=n1 + n2)


@dataclass
class AVRTrend:
    radii: np.ndarray
    ratios: np.ndarray
    limit: float

    def to_dict(self):
        return {"radii": self.radii, "ratios": self.ratios, "limit": self.limit}


def compute_avr(space, radii, x0=None):
    """Volume ratios Vol B(x0, r)/r² and their extrapolation to r -> ∞.

    The limit is the constant term of a least-squares fit a + b/r + c/r²
    (a + b/r with two radii; the last ratio with one).
    """
    compact = (isinstance(space, SpaceForm) and space.kappa > 0) or \
        (isinstance(space, RadialProfile) and space.topology == "sphere-double-chart") or \
        (isinstance(space, ConformalGrid) and space.chart_kind == "sphere-stereographic")
    if compact:
        raise UndefinedAVR("asymptotic volume ratio needs a noncompact space")
    radii = np.asarray(radii, float)
    x0 = _default_center(space) if x0 is None else x0
    vols, _, notes = _ball_areas(space, x0, radii)
    ratios = vols / radii**2
    k = min(3, radii.size)
    if k == 1:
        limit = float(ratios[-1])
    else:
        V = np.vander(1 / radii, k, increasing=True)
        coef, *_ = np.linalg.lstsq(V, ratios, rcond=None)
        limit = float(coef[0])
    return AVRTrend(radii, ratios, limit)


# flow checks
def _snapshots(traj, t_min=0.0):
    t = traj.times
    return [i for i in range(len(traj)) if t[i] > 0 and t[i] >= t_min]


def check_metric_equivalence(traj, M1, M2):
    """e^{-2 M2 t} g(0) <= g(t) <= e^{2 M1 t} g(0), i.e. -M2 t <= u(t) - u(0) <= M1 t."""
    u0 = traj.u(0)
    up, down = 0.0, 0.0
    wit = {}
    for i in _snapshots(traj):
        t = traj.times[i]
        du = traj.u(i) - u0
        rate = du[np.isfinite(du)] / t
        if rate.size == 0:
            continue
        hi, lo = float(rate.max()), float(-rate.min())
        if hi > up:
            up, wit["upper_t"] = hi, float(t)
        if lo > down:
            down, wit["lower_t"] = lo, float(t)
    margin = min(M1 - up, M2 - down)
    return EstimateReport("metric_equivalence", float(margin), 1e-12,
                          constants={"M1": M1, "M2": M2, "M1_min": up, "M2_min": down},
                          witnesses=wit)


def fit_curvature_decay(traj, tol=0.1, t_min=0.0):
    """Minimal c with sup|K(t)| <= c/t, and the lower bound K >= -(1 + tol)/(2t)."""
    c_fit, worst_lower = 0.0, np.inf
    wit = {}
    for i in _snapshots(traj, t_min):
        t = traj.times[i]
        K = traj.curvature(i)
        Kv = K[np.isfinite(K)]
        if Kv.size == 0:
            continue
        c = float(np.max(np.abs(Kv))) * t
        if c > c_fit:
            c_fit, wit["c0_time"] = c, float(t)
        low = 2 * t * float(Kv.min())
        if low < worst_lower:
            worst_lower, wit["lower_time"] = low, float(t)
    if not np.isfinite(worst_lower):
        raise InvalidInput("trajectory has no positive-time curvature data")
    return EstimateReport("curvature_decay", float(worst_lower + 1.0), tol,
                          constants={"c0": c_fit, "min_2tK": worst_lower},
                          witnesses=wit)


class _PairDistances:
    """Distances between point pairs on one snapshot, reusing shortest-path trees."""

    def __init__(self, space):
        self.space = space
        self.rows = {}

    def __call__(self, p, q):
        s = self.space
        if isinstance(s, ConformalGrid):
            key = s.flat_index(p)
            if key not in self.rows:
                self.rows[key] = grid_distances_from(s, [key])[0]
            return float(self.rows[key][s.flat_index(q)])
        return float(distance(s, p, q))


def pair_distance_table(traj, pairs, t_min=0.0):
    """Array [snapshot, pair] of distances, snapshot 0 first, then t >= t_min."""
    idx = [0] + [i for i in _snapshots(traj, t_min)]
    table = np.empty((len(idx), len(pairs)))
    for a, i in enumerate(idx):
        dist = _PairDistances(traj.space(i))
        for b, (p, q) in enumerate(pairs):
            table[a, b] = dist(p, q)
    return np.array([traj.times[i] for i in idx]), table


def check_distance_sandwich(traj, pairs, alpha, c0, beta, t_min=0.0):
    """d0 - β√(c0 t) <= d_t <= e^{αt} d0, plus the two-time form for t1 <= t2."""
    times, D = pair_distance_table(traj, pairs, t_min)
    d0 = D[0]
    scale = max(float(np.max(d0)), 1e-300)
    margins = {}
    wit = {}
    t = times[1:, None]
    Dt = D[1:]
    if Dt.size:
        upper = np.exp(alpha * t) * d0 - Dt
        lower = Dt - (d0 - beta * np.sqrt(c0 * t))
        margins["upper"] = float(upper.min())
        margins["lower"] = float(lower.min())
        wit["upper"] = _argwit(upper, times[1:])
        wit["lower"] = _argwit(lower, times[1:])
        # two-time form over every ordered pair of positive times
        worst2u, worst2l = np.inf, np.inf
        for a in range(len(Dt)):
            for b in range(a, len(Dt)):
                t1, t2 = times[1 + a], times[1 + b]
                up = float(np.min(np.exp(alpha * (t2 - t1)) * Dt[a] - Dt[b]))
                lo = float(np.min(Dt[b] - (Dt[a] - beta * np.sqrt(c0) * (np.sqrt(t2) - np.sqrt(t1)))))
                worst2u, worst2l = min(worst2u, up), min(worst2l, lo)
        margins["two_time_upper"] = worst2u
        margins["two_time_lower"] = worst2l
    margin = min(margins.values()) / scale if margins else np.inf
    return EstimateReport("distance_sandwich", float(margin), 1e-9,
                          constants={"alpha": alpha, "c0": c0, "beta": beta,
                                     "margins": margins, "n_pairs": len(pairs),
                                     "n_times": int(len(times) - 1)},
                          witnesses=wit)


def _argwit(arr, times):
    i, j = np.unravel_index(int(np.argmin(arr)), arr.shape)
    return {"t": float(times[i]), "pair": int(j), "value": float(arr[i, j])}


def fit_holder(traj, pairs, c0=None, t_min=0.0, t_max=None):
    """Fit the Hölder constants relating d_{g0} and d_{g(t)}.

    gamma: minimal with d0 <= gamma d_t^{1/(1+4 c0)};
    eta:   maximal with d_t >= eta d0^{1 + 2(n-1) c0};
    sigma: minimal sigma >= 1 with d_t/sigma <= d0 <= sigma d_t^{1/sigma}.
    """
    if c0 is None:
        c0 = fit_curvature_decay(traj, t_min=t_min).constants["c0"]
    times, D = pair_distance_table(traj, pairs, t_min)
    keep = np.ones(len(times), bool)
    keep[0] = False
    if t_max is not None:
        keep &= times <= t_max
    d0 = D[0][None, :]
    Dt = D[keep]
    if Dt.size == 0:
        raise InvalidInput("no positive-time snapshots in range")
    p = 1.0 / (1 + 4 * c0)
    gamma = float(np.max(d0 / Dt**p))
    q = 1 + 2 * (DIM - 1) * c0
    eta = float(np.min(Dt / d0**q))
    d0b = np.broadcast_to(d0, Dt.shape)
    sigma = _fit_sigma(d0b.ravel(), Dt.ravel())
    finite = np.isfinite(gamma) and np.isfinite(sigma) and eta > 0
    return EstimateReport("holder", 0.0 if finite else -np.inf, 0.0,
                          constants={"c0": c0, "exponent": p, "gamma": gamma,
                                     "eta": eta, "eta_exponent": q, "sigma": sigma})


def _fit_sigma(d0, dt):
    def ok(s):
        return bool(np.all(dt / s <= d0 * (1 + 1e-12)) and np.all(d0 <= s * dt ** (1 / s) * (1 + 1e-12)))

    lo = max(1.0, float(np.max(dt / d0)), float(np.max(np.log(np.maximum(dt, 1.0)))))
    if ok(lo):
        return lo
    hi = 2 * lo
    while not ok(hi):
        hi *= 2
        if hi > 1e12:
            return np.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def check_area_law(traj, tolerance=0.01, area_floor=0.05):
    """Finite-difference slope of total area against the Gauss-Bonnet value -8π.

    Only intervals with area above ``area_floor`` times the initial area
    enter the sphere assertion.  Other topologies get the measured slope
    without an assertion.
    """
    s = traj.series
    t, A = s["t"], s["total_area"]
    if len(t) < 2:
        raise InvalidInput("need at least two time levels")
    slopes = np.diff(A) / np.diff(t)
    use = A[1:] >= area_floor * A[0]
    if traj.topology != "sphere-double-chart":
        return EstimateReport("area_law", 0.0, 0.0,
                              constants={"mean_slope": float(np.mean(slopes)),
                                         "max_abs_slope": float(np.max(np.abs(slopes)))},
                              notes=["non-sphere topology: slope reported without assertion"],
                              asserted=False)
    target = -8 * np.pi
    rel = np.abs(slopes[use] / target - 1)
    i = int(np.argmax(rel)) if rel.size else 0
    return EstimateReport("area_law", float(tolerance - rel.max()) if rel.size else np.inf, 0.0,
                          constants={"target_slope": target,
                                     "mean_slope": float(np.mean(slopes[use])),
                                     "max_rel_error": float(rel.max()) if rel.size else 0.0,
                                     "tolerance": tolerance},
                          witnesses={"t": float(t[1:][use][i]) if rel.size else None})


def curvature_gradient_norm(space, K):
    """|∇K|_g at every node (NaN where K or a neighbour is unavailable)."""
    if isinstance(space, ConformalGrid):
        gx, gy = np.gradient(K, space.h)
        return np.exp(-space.u) * np.hypot(gx, gy)
    if isinstance(space, RadialProfile):
        return np.exp(-space.w) * np.abs(np.gradient(K, space.s))
    raise InvalidInput(f"no gradient for {type(space).__name__}")


def shi_statistic(traj, k=1, interior=None, t_min=0.0):
    """sup_t sup_interior |∇K| t^{1 + k/2} (k = 1 only)."""
    if k != 1:
        raise InvalidInput("only first derivatives (k = 1) are implemented")
    best, wit = 0.0, {}
    for i in _snapshots(traj, t_min):
        t, space = traj.snapshot(i)
        K = traj.curvature(i)
        g = curvature_gradient_norm(space, K)
        mask = _interior_mask(space, interior)
        vals = g[mask & np.isfinite(g)]
        if vals.size == 0:
            continue
        v = float(vals.max()) * t ** (1 + k / 2)
        if v > best:
            best, wit = v, {"t": float(t)}
    return best, wit


def _interior_mask(space, interior):
    if isinstance(space, ConformalGrid):
        X, Y = space.coords()
        m = space.interior_mask.copy()
        if interior is not None:
            m &= np.asarray(interior(X, Y), bool)
        return m
    m = ~space.boundary_nodes()
    if interior is not None:
        m &= np.asarray(interior(space.r), bool)
    return m


def check_shi_decay(trajs, k=1, interior=None, t_min=0.0, ratio_limit=1.2):
    """Shi-type interior bound |∇K| <= C/t^{3/2}, tested for stability under refinement.

    ``trajs`` is one trajectory or a list ordered from coarse to fine;
    the statistic must not grow by more than ``ratio_limit`` between levels.
    """
    if not isinstance(trajs, (list, tuple)):
        trajs = [trajs]
    stats = []
    wits = []
    for tr in trajs:
        s, w = shi_statistic(tr, k, interior, t_min)
        stats.append(s)
        wits.append(w)
    stats = np.array(stats)
    if len(stats) < 2:
        margin = 0.0 if np.isfinite(stats[0]) else -np.inf
        ratios = np.array([])
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(stats[:-1] > 0, stats[1:] / stats[:-1], np.where(stats[1:] > 0, np.inf, 1.0))
        margin = float(ratio_limit - ratios.max())
    return EstimateReport("shi_decay", margin, 0.0,
                          constants={"statistic": stats, "ratios": ratios, "k": k,
                                     "ratio_limit": ratio_limit},
                          witnesses={"levels": wits})
