"""ε-nets, pointed Gromov-Hausdorff approximations and tangent-cone tests on finite samples."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .surface.cones import ConeSpace, SmoothedCone, SpaceForm, polar_pattern
from .surface.metric import FiniteMetricSpace, metric_closure

EXHAUSTIVE_CAP = 8
MAX_ENUMERATION = 2_000_000
SINGULAR_THRESHOLD = 0.05


@dataclass(frozen=True)
class NetResult:
    indices: np.ndarray
    epsilon: float
    radius: float
    packing_radius: float
    covering_radius: float
    covered: bool
    max_cover_distance: float
    selection_covered: bool

    @property
    def cardinality(self):
        return int(self.indices.size)

    def to_dict(self):
        return {"indices": self.indices.tolist(), "epsilon": self.epsilon, "radius": self.radius,
                "cardinality": self.cardinality, "packing_radius": self.packing_radius,
                "covering_radius": self.covering_radius, "covered": self.covered,
                "max_cover_distance": self.max_cover_distance}


def maximal_net(fms: FiniteMetricSpace, x0=None, r=1.0, eps=0.1) -> NetResult:
    """Greedy farthest-point net of B(x0, r - ε/9) with separation > 2ε/9.

    Separation > 2ε/9 is the finite stand-in for disjoint balls of radius
    ε/9; the ε/3-balls about the net then cover the selection ball.
    Coverage of the full ball B(x0, r) is reported as well.
    """
    if not 0 < eps < r:
        raise InvalidInput("need 0 < eps < r")
    x0 = fms.basepoint if x0 is None else int(x0)
    d = fms.d
    sel = np.flatnonzero(d[x0] <= r - eps / 9)
    if sel.size == 0:
        raise InvalidInput("empty ball")
    sep = 2 * eps / 9
    net = [x0] if x0 in sel else [int(sel[0])]
    mind = d[net[0], sel].copy()
    while True:
        k = int(np.argmax(mind))  # first maximum: lowest index wins ties
        if mind[k] <= sep:
            break
        net.append(int(sel[k]))
        mind = np.minimum(mind, d[sel[k], sel])
    net = np.array(net)
    full = np.flatnonzero(d[x0] <= r)
    cover = d[np.ix_(net, full)].min(axis=0)
    return NetResult(net, eps, r, eps / 9, eps / 3, bool(cover.max() < eps / 3),
                     float(cover.max()), bool(mind.max() < eps / 3))


def packing_cardinality_bound(r, eps, ball_area_upper, small_ball_area_lower):
    """floor(upper/lower): volume-comparison bound on the size of any ε/9-packing."""
    if min(r, eps, ball_area_upper, small_ball_area_lower) <= 0:
        raise InvalidInput("inputs must be positive")
    return max(1, int(np.floor(ball_area_upper / small_ball_area_lower * (1 + 1e-12))))


@dataclass(frozen=True)
class PointMap:
    """Map from source indices to target indices; ``domain`` defaults to all sources."""

    targets: np.ndarray
    domain: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.targets, int)
        dom = np.arange(t.size) if self.domain is None else np.asarray(self.domain, int)
        if dom.size != t.size:
            raise InvalidInput("map must assign one target per domain point")
        object.__setattr__(self, "targets", t)
        object.__setattr__(self, "domain", dom)

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n))

    def __call__(self, i):
        k = np.flatnonzero(self.domain == i)
        if k.size == 0:
            raise InvalidInput(f"point {i} is outside the map's domain")
        return int(self.targets[k[0]])


def distortion(f: PointMap, X: FiniteMetricSpace, Y: FiniteMetricSpace) -> float:
    """max |d_Y(f x, f x') - d_X(x, x')| over the domain."""
    if f.domain.size and (f.domain.max() >= X.n or f.targets.max() >= Y.n):
        raise InvalidInput("map refers to points outside the spaces")
    dx = X.d[np.ix_(f.domain, f.domain)]
    dy = Y.d[np.ix_(f.targets, f.targets)]
    return float(np.max(np.abs(dy - dx))) if dx.size else 0.0


@dataclass
class GHCheck:
    passed: bool
    basepoint_ok: bool
    distortion: float
    coverage_ok: bool
    uncovered: list = field(default_factory=list)
    worst_pair: tuple | None = None

    def to_dict(self):
        return {"pass": self.passed, "basepoint_ok": self.basepoint_ok,
                "distortion": self.distortion, "coverage_ok": self.coverage_ok,
                "uncovered": self.uncovered, "worst_pair": self.worst_pair}


def check_pointed_gh_approx(f: PointMap, X, Y, r, eps) -> GHCheck:
    """The three conditions of an ε-approximation f: B_X(x∞, r) -> Y.

    1. f(x∞) = y∞; 2. distortion < ε on the ball; 3. the ε-neighbourhood of
    f(ball) contains B_Y(y∞, r - ε).
    """
    ball = np.flatnonzero(X.d[X.basepoint] <= r)
    missing = np.setdiff1d(ball, f.domain)
    if missing.size:
        raise InvalidInput(f"map is not defined on ball points {missing[:5].tolist()}")
    g = _restrict(f, ball)
    bp_ok = g(X.basepoint) == Y.basepoint
    dx = X.d[np.ix_(g.domain, g.domain)]
    dy = Y.d[np.ix_(g.targets, g.targets)]
    err = np.abs(dy - dx)
    k = int(np.argmax(err))
    dis = float(err.flat[k])
    worst = (int(g.domain[k // len(g.domain)]), int(g.domain[k % len(g.domain)]))
    target_ball = np.flatnonzero(Y.d[Y.basepoint] <= r - eps)
    near = Y.d[np.ix_(target_ball, np.unique(g.targets))].min(axis=1) if target_ball.size else np.array([])
    uncovered = target_ball[near >= eps].tolist() if near.size else []
    cov_ok = not uncovered
    return GHCheck(bool(bp_ok and dis < eps and cov_ok), bool(bp_ok), dis, cov_ok,
                   uncovered, worst)


def _restrict(f, pts):
    pos = {int(i): k for k, i in enumerate(f.domain)}
    return PointMap(f.targets[[pos[int(i)] for i in pts]], pts)


def approximation_error(f: PointMap, X, Y, r):
    """Smallest ε* such that f passes check_pointed_gh_approx for every ε > ε*."""
    ball = np.flatnonzero(X.d[X.basepoint] <= r)
    g = _restrict(f, ball)
    if g(X.basepoint) != Y.basepoint:
        return np.inf
    return _eps_star(X.d[np.ix_(ball, ball)], Y.d, g.targets[None, :], Y.d[Y.basepoint], r)[0]


def _eps_star(dx, DY, maps, dy0, r):
    """ε* for a batch of maps (rows of target indices over the same domain)."""
    img = DY[maps[:, :, None], maps[:, None, :]]
    dis = np.max(np.abs(img - dx[None]), axis=(1, 2))
    # coverage: each y needs dist(y, image) < ε unless d(y∞, y) > r - ε
    near = np.min(DY[:, maps].transpose(1, 0, 2), axis=2)  # (maps, |Y|)
    slack = np.minimum(near, r - dy0[None, :])
    cov = np.max(np.maximum(slack, 0.0), axis=1)
    return np.maximum(dis, cov)


@dataclass
class GHEstimate:
    epsilon: float
    map: PointMap
    exhaustive: bool
    method: str

    def __float__(self):
        return float(self.epsilon)

    def to_dict(self):
        return {"epsilon": self.epsilon, "exhaustive": self.exhaustive, "method": self.method,
                "map": self.map.targets.tolist()}


def gh_upper_estimate(X: FiniteMetricSpace, Y: FiniteMetricSpace, r, cap=EXHAUSTIVE_CAP) -> GHEstimate:
    """Upper bound ε* on pointed-GH closeness of B_X(x∞, r) to Y.

    Small balls (at most ``cap`` points, with the enumeration size bounded)
    are solved by trying every basepoint-preserving map, which is minimal
    over maps.  Larger balls use a greedy assignment refined by coordinate
    sweeps, also trying the index-aligned map; that result is an upper
    bound only.
    """
    ball = np.flatnonzero(X.d[X.basepoint] <= r)
    order = ball[np.argsort(X.d[X.basepoint, ball], kind="stable")]
    dx = X.d[np.ix_(order, order)]
    dy0 = Y.d[Y.basepoint]
    k = order.size
    if k <= cap and Y.n ** (k - 1) <= MAX_ENUMERATION:
        eps, targets = _exhaustive(dx, Y.d, Y.basepoint, dy0, r)
        return GHEstimate(float(eps), PointMap(targets, order), True, "exhaustive")
    best_eps, best = np.inf, None
    candidates = [_greedy(dx, Y.d, Y.basepoint)]
    if X.n == Y.n and X.basepoint == Y.basepoint:
        candidates.append(order.copy())
    for cand in candidates:
        cand = _sweep(dx, Y.d, cand, dy0, r, Y.basepoint)
        e = float(_eps_star(dx, Y.d, cand[None, :], dy0, r)[0])
        if e < best_eps:
            best_eps, best = e, cand
    return GHEstimate(best_eps, PointMap(best, order), False, "greedy")


def _exhaustive(dx, DY, y0, dy0, r):
    k = dx.shape[0]
    m = DY.shape[0]
    best, best_map = np.inf, None
    if k == 1:
        maps = np.array([[y0]])
        e = _eps_star(dx, DY, maps, dy0, r)
        return float(e[0]), maps[0]
    total = m ** (k - 1)
    chunk = max(1, 200_000 // max(1, k * k))
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk))
        digits = np.empty((codes.size, k), int)
        digits[:, 0] = y0
        c = codes.copy()
        for j in range(k - 1, 0, -1):
            digits[:, j] = c % m
            c //= m
        e = _eps_star(dx, DY, digits, dy0, r)
        i = int(np.argmin(e))  # lexicographically first among ties
        if e[i] < best:
            best, best_map = float(e[i]), digits[i].copy()
    return best, best_map


def _greedy(dx, DY, y0):
    """Assign points in order of distance from the basepoint, minimizing added distortion."""
    k = dx.shape[0]
    t = np.empty(k, int)
    t[0] = y0
    for i in range(1, k):
        cost = np.max(np.abs(DY[:, t[:i]] - dx[i, :i][None, :]), axis=1)
        t[i] = int(np.argmin(cost))
    return t


def _sweep(dx, DY, t, dy0, r, y0, rounds=3):
    """Coordinate descent: move single points to the target minimizing ε*.

    Moving point i only changes row/column i of the distortion matrix and
    one column of the coverage table, so each trial set is scored in
    O(|Y| k) rather than by re-evaluating every pair.
    """
    t = t.copy()
    k = t.size
    reach = r - dy0
    cur = float(_eps_star(dx, DY, t[None, :], dy0, r)[0])
    if cur == 0.0 or k < 2:
        return t
    for _ in range(rounds):
        improved = False
        for i in range(1, k):
            others = np.delete(np.arange(k), i)
            E = np.abs(DY[np.ix_(t[others], t[others])] - dx[np.ix_(others, others)])
            dis_rest = float(E.max()) if E.size else 0.0
            row = np.max(np.abs(DY[:, t[others]] - dx[i, others][None, :]), axis=1)
            near_rest = DY[:, t[others]].min(axis=1)
            near = np.minimum(near_rest[None, :], DY)  # trial target y -> distances to image
            cov = np.max(np.maximum(np.minimum(near, reach[None, :]), 0.0), axis=1)
            e = np.maximum(np.maximum(row, dis_rest), cov)
            j = int(np.argmin(e))
            if e[j] < cur - 1e-15:
                cur = float(e[j])
                t[i] = j
                improved = True
        if not improved:
            break
    return t


def tangent_rescale(fms: FiniteMetricSpace, p=None, lam=1.0) -> FiniteMetricSpace:
    """(X, λ d, p): distances scaled by λ, basepoint moved to p."""
    if not lam > 0:
        raise InvalidInput("rescaling factor must be positive")
    out = fms.rescaled(lam)
    if p is not None and int(p) != out.basepoint:
        out = FiniteMetricSpace(out.base, int(p), out.scale, out.points, out.short,
                                check=False, meta=out.meta)
    return out


# exponential-map patterns on the analytic spaces
def exp_pattern(space, p, radius, rings=4):
    """Images under exp_p of a polar ring pattern of the given radius.

    Returns polar coordinates about the distinguished point of ``space``
    (cone vertex, cap tip or origin).  The pattern must fit inside a
    neighbourhood where exp_p is a local isometry onto its image.
    """
    pat = polar_pattern(radius, rings)
    R1, th1 = float(p[0]), float(p[1])
    if isinstance(space, SmoothedCone):
        if R1 == 0:
            return pat
        if R1 - radius <= space.seam_distance:
            raise InvalidInput("pattern reaches the cap; choose a smaller radius")
        c = space.c
        R1 = space._cone_radius(R1)
        offset = space.seam_distance - space.delta
    elif isinstance(space, ConeSpace):
        c, offset = space.c, 0.0
        if R1 == 0:
            return pat
    elif isinstance(space, SpaceForm) and space.kappa == 0:
        c, offset = 1.0, 0.0
        if R1 == 0:
            return pat
    else:
        raise InvalidInput(f"no exponential pattern for {type(space).__name__}")
    if radius >= R1:
        raise InvalidInput("pattern must not contain the vertex")
    # unrolled plane with p at (R1, 0); pattern offsets are Euclidean vectors
    vx = pat[:, 0] * np.cos(pat[:, 1])
    vy = pat[:, 0] * np.sin(pat[:, 1])
    X, Y = R1 + vx, vy
    R = np.hypot(X, Y)
    phi = np.arctan2(Y, X)
    return np.column_stack([R + offset, np.mod(th1 + phi / c, 2 * np.pi)])


def ball_sample(space, p, radius, rings=4):
    """FMS on the exponential pattern of B(p, radius), basepoint p."""
    if isinstance(space, FiniteMetricSpace):
        return space
    pts = exp_pattern(space, p, radius, rings)
    d = metric_closure(space.pairwise(pts))
    return FiniteMetricSpace(d, 0, points=pts, meta={"source": type(space).__name__})


@dataclass
class SingularVerdict:
    verdict: str
    estimates: list
    lambdas: list
    threshold: float

    def to_dict(self):
        return {"verdict": self.verdict, "estimates": self.estimates,
                "lambdas": self.lambdas, "threshold": self.threshold}


def detect_singular(space, p, lambdas, eps=None, radius=1.0, rings=4) -> SingularVerdict:
    """Compare λ-rescaled balls at p with a flat ball of equal radius.

    For each λ the ball B(p, radius/λ) is sampled on the exponential
    pattern, rescaled by λ and compared with the same pattern in the plane.
    Singular if every estimate is >= ε, regular if every estimate is < ε,
    inconclusive otherwise.  ε defaults to 0.05·radius.
    """
    lambdas = [float(x) for x in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])) or min(lambdas) <= 0:
        raise InvalidInput("λ list must be positive and increasing")
    eps = SINGULAR_THRESHOLD * radius if eps is None else eps
    flat = ball_sample(SpaceForm(0.0), (0.0, 0.0), radius, rings)
    est = []
    for lam in lambdas:
        X = tangent_rescale(ball_sample(space, p, radius / lam, rings), None, lam)
        est.append(float(gh_upper_estimate(X, flat, radius).epsilon))
    above = [e >= eps for e in est]
    verdict = "singular" if all(above) else "regular" if not any(above) else "inconclusive"
    return SingularVerdict(verdict, est, lambdas, eps)
