"""Existence-time arithmetic: Shi horizons, the extension iteration, pyramid domains, conformal completion."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import HypothesisViolation, InvalidInput, RadiusExhausted
from .surface.grid import ConformalGrid, grid_curvature, grid_distances_from


def shi_horizon(K, iterated=False, terms=None):
    """Shi's existence time 1/(16K); iterating on doubled curvature bounds sums to 1/(8K).

    ``terms`` gives the N-term partial sum (1 - 2^-N)/(8K).
    """
    K = float(K)
    if not K > 0 or not np.isfinite(K):
        raise InvalidInput("curvature bound must be positive and finite")
    if terms is not None:
        n = int(terms)
        if n < 1:
            raise InvalidInput("terms must be >= 1")
        return (1.0 - 2.0 ** -n) / (8.0 * K)
    return 1.0 / (8.0 * K) if iterated else 1.0 / (16.0 * K)


def _positive(**kw):
    for k, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise InvalidInput(f"{k} must be positive, got {v}")


@dataclass(frozen=True)
class ConstantPack:
    """Hypothesis constants (v0, α0) and supplied lemma constants (C0, T̂, Ŝ, γ).

    Derived quantities are properties so they can never go stale.
    """

    v0: float = 1.0
    alpha0: float = 1.0
    C0: float = 2.0
    T_hat: float = 1.0
    S_hat: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        _positive(v0=self.v0, alpha0=self.alpha0, C0=self.C0, T_hat=self.T_hat,
                  S_hat=self.S_hat, gamma=self.gamma)
        if self.gamma < 1:
            raise InvalidInput("gamma must be >= 1")
        if self.C0 < 1:
            raise InvalidInput("C0 must be >= 1")

    @property
    def c0(self):
        return 4.0 * self.gamma * self.C0

    @property
    def delta0(self):
        return 1.0 / (100.0 * self.c0)

    @property
    def tau(self):
        return min(self.T_hat, self.S_hat)

    @property
    def gate(self):
        return gate(self.tau, self.alpha0, self.c0)

    def to_dict(self):
        return {"v0": self.v0, "alpha0": self.alpha0, "C0": self.C0, "T_hat": self.T_hat,
                "S_hat": self.S_hat, "gamma": self.gamma, "c0": self.c0,
                "delta0": self.delta0, "tau": self.tau, "gate": self.gate}


@dataclass(frozen=True)
class SchedulePack:
    """The three numbers the extension iteration actually uses."""

    c0: float
    tau: float
    alpha0: float

    def __post_init__(self):
        _positive(c0=self.c0, tau=self.tau, alpha0=self.alpha0)

    @property
    def gate(self):
        return gate(self.tau, self.alpha0, self.c0)

    def to_dict(self):
        return {"c0": self.c0, "tau": self.tau, "alpha0": self.alpha0, "gate": self.gate}


def gate(tau, alpha0, c0):
    """Largest start time the extension step accepts: τ/(200 α0 c0)."""
    return tau / (200.0 * alpha0 * c0)


def wire_constants(v0=1.0, alpha0=1.0, C0=2.0, T_hat=1.0, S_hat=1.0, gamma=2.0) -> ConstantPack:
    return ConstantPack(float(v0), float(alpha0), float(C0), float(T_hat), float(S_hat), float(gamma))


def growth(c0):
    return 1.0 + 1.0 / (4.0 * c0)


def extend_once(ell1, r1, pack, check_radius=True):
    """One extension step: ℓ2 = ℓ1(1 + 1/(4c0)), r2 = r1 - 6√(ℓ2/τ)."""
    _positive(ell1=ell1, r1=r1)
    if ell1 > pack.gate:
        raise HypothesisViolation(f"start time {ell1} exceeds the gate {pack.gate}")
    if check_radius and r1 < 2:
        raise HypothesisViolation(f"start radius {r1} < 2")
    ell2 = ell1 * growth(pack.c0)
    r2 = r1 - 6.0 * np.sqrt(ell2 / pack.tau)
    if r2 < 1:
        raise RadiusExhausted(f"radius {r2} < 1 after extension")
    return ell2, r2


@dataclass
class ExtensionSchedule:
    ell: np.ndarray
    r: np.ndarray
    outcome: str
    pack: object

    @property
    def steps(self):
        return len(self.ell) - 1

    @property
    def success(self):
        return self.outcome == "time-threshold-reached"

    @property
    def final_time(self):
        return float(self.ell[-1])

    @property
    def radius_loss(self):
        return float(self.r[0] - self.r[-1])

    def rows(self):
        return [(k, float(a), float(b)) for k, (a, b) in enumerate(zip(self.ell, self.r))]

    def to_dict(self):
        return {"outcome": self.outcome, "steps": self.steps, "ell": self.ell.tolist(),
                "r": self.r.tolist(), "radius_loss": self.radius_loss, "pack": self.pack.to_dict()}


def run_schedule(ell1, r1, r_target, pack) -> ExtensionSchedule:
    """Iterate extend_once until ℓ exceeds the gate or the radius would drop below r_target.

    ℓ_k is computed as ℓ1·q^k so the step count obeys
    q^N ℓ1 > gate >= q^(N-1) ℓ1 without accumulated rounding.
    """
    if not (r1 > r_target >= 1):
        raise InvalidInput("need r1 > r_target >= 1")
    _positive(ell1=ell1)
    q = growth(pack.c0)
    g = pack.gate
    ell, r = [float(ell1)], [float(r1)]
    outcome = "time-threshold-reached"
    k = 0
    while ell[-1] <= g:
        k += 1
        nxt = ell1 * q**k
        r2 = r[-1] - 6.0 * np.sqrt(nxt / pack.tau)
        if r2 < r_target:
            outcome = "radius-exhausted"
            break
        ell.append(nxt)
        r.append(r2)
    return ExtensionSchedule(np.array(ell), np.array(r), outcome, pack)


def radius_budget(pack):
    """Geometric bound on the total radius lost by any schedule started below the gate."""
    q = growth(pack.c0)
    ell_max = pack.gate * q
    return 6.0 * np.sqrt(ell_max / pack.tau) / (1.0 - q**-0.5)


@dataclass
class PyramidDomain:
    """∪_k B(x0, k) × [0, T_k] with T_k nonincreasing."""

    T: np.ndarray
    raw_T: np.ndarray
    truncated_at: int | None = None
    schedules: list = field(default_factory=list, repr=False)

    @property
    def k_max(self):
        return len(self.T)

    def rows(self):
        return [(k + 1, float(t), float(s.r[0]), float(s.r[-1]))
                for k, (t, s) in enumerate(zip(self.T, self.schedules))]

    def to_dict(self):
        return {"T": self.T.tolist(), "raw_T": self.raw_T.tolist(), "k_max": self.k_max,
                "truncated_at": self.truncated_at}


def pyramid_build(k_max, pack, ell1: float | Sequence[float] | Callable[[int], float] | None = None,
                  r1: Callable[[int], float] | None = None) -> PyramidDomain:
    """T_k = success time of the schedule from radius k + 1 + B down to radius k.

    ``ell1`` is the start time per k (constant, sequence, or callable);
    the default is gate/k.  T_k is made nonincreasing by a running minimum.
    A k whose schedule fails truncates the domain there.
    """
    k_max = int(k_max)
    if k_max < 1:
        raise InvalidInput("k_max must be >= 1")
    B = radius_budget(pack)
    if ell1 is None:
        ell_of = lambda k: pack.gate / k
    elif callable(ell1):
        ell_of = ell1
    elif np.ndim(ell1) == 0:
        ell_of = lambda k: float(ell1)
    else:
        seq = list(ell1)
        if len(seq) < k_max:
            raise InvalidInput("need one start time per k")
        ell_of = lambda k: seq[k - 1]
    r_of = r1 or (lambda k: k + 1 + B)
    raw, scheds, trunc = [], [], None
    for k in range(1, k_max + 1):
        s = run_schedule(float(ell_of(k)), float(r_of(k)), float(k), pack)
        if not s.success:
            trunc = k
            break
        raw.append(s.final_time)
        scheds.append(s)
    raw = np.array(raw)
    return PyramidDomain(np.minimum.accumulate(raw), raw, trunc, scheds)


def pyramid_member(domain: PyramidDomain, distance, t):
    """True iff some k has distance < k and 0 <= t <= T_k."""
    if distance < 0 or t < 0 or domain.k_max == 0:
        return False
    k = int(np.floor(distance)) + 1  # smallest admissible k; T is nonincreasing
    return bool(k <= domain.k_max and t <= domain.T[k - 1])


# conformal completion
@dataclass(frozen=True)
class Disc:
    center: tuple
    radius: float

    def boundary_distance(self, X, Y):
        return self.radius - np.hypot(X - self.center[0], Y - self.center[1])


@dataclass(frozen=True)
class MaskRegion:
    """Region given by a node mask; boundary distance from the Euclidean distance transform."""

    mask: np.ndarray

    def boundary_distance(self, X, Y, h=None):
        d = distance_transform_edt(np.asarray(self.mask, bool))
        return np.where(self.mask, d * h - 0.5 * h, -1.0)


def _region_distance(grid, U):
    X, Y = grid.coords()
    if isinstance(U, Disc):
        return U.boundary_distance(X, Y)
    if callable(U) and not isinstance(U, MaskRegion):
        U = MaskRegion(np.asarray(U(X, Y), bool) & grid.domain)
    if not isinstance(U, MaskRegion):
        U = MaskRegion(np.asarray(U, bool) & grid.domain)
    return U.boundary_distance(X, Y, grid.h)


def cutoff(x):
    """Smooth step: 1 for x <= 1, 0 for x >= 2."""
    x = np.asarray(x, float)
    a = np.clip(2.0 - x, 0, None)
    b = np.clip(x - 1.0, 0, None)
    with np.errstate(divide="ignore"):
        pa = np.where(a > 0, np.exp(-1.0 / np.where(a > 0, a, 1.0)), 0.0)
        pb = np.where(b > 0, np.exp(-1.0 / np.where(b > 0, b, 1.0)), 0.0)
    return pa / (pa + pb)


@dataclass
class CompletionResult:
    grid: ConformalGrid
    rho: float
    gamma_fit: float
    boundary_distance: np.ndarray
    unchanged: np.ndarray

    def to_dict(self):
        return {"rho": self.rho, "gamma_fit": self.gamma_fit,
                "unchanged_nodes": int(self.unchanged.sum())}


def hochard_complete(grid: ConformalGrid, U, rho, check=True, fit_margin=2.0) -> CompletionResult:
    """Blow u up conformally near ∂U so the metric becomes complete on U.

    With s the chart distance to ∂U and b = ln(ρ/s) the factor of the
    constant -ρ⁻² collar, u~ = u + χ(s/ρ)·softplus(b - u), where χ is a
    smooth step from 1 (s <= ρ) to 0 (s >= 2ρ).  u~ equals u node for node
    on U_{2ρ}.  γ_fit = ρ²·max|K~| over nodes at least ``fit_margin``·h
    from ∂U.
    """
    if not 0 < rho <= 1:
        raise InvalidInput("need 0 < rho <= 1")
    s = _region_distance(grid, U)
    inside = grid.domain & (s > 0)
    if not inside.any():
        raise InvalidInput("region has no grid nodes")
    if check:
        K = grid_curvature(grid)
        k = K[inside & np.isfinite(K)]
        if k.size and np.max(np.abs(k)) > rho**-2 * (1 + 1e-12):
            raise InvalidInput(f"sup|K| = {np.max(np.abs(k)):.4g} exceeds rho^-2 = {rho**-2:.4g}")
    u = np.where(inside, grid.u, np.nan)
    far = inside & (s >= 2 * rho)
    ss = np.where(inside, s, 1.0)
    b = np.log(rho / ss)
    chi = cutoff(ss / rho)
    blend = np.logaddexp(0.0, b - np.where(inside, u, 0.0))
    ut = np.where(far, u, u + chi * blend)
    out = ConformalGrid(np.where(inside, ut, np.nan), grid.h, grid.origin, grid.chart_kind, inside)
    Kt = grid_curvature(out)
    sel = inside & np.isfinite(Kt) & (s >= fit_margin * grid.h)
    gamma_fit = float(rho**2 * np.max(np.abs(Kt[sel]))) if sel.any() else np.nan
    return CompletionResult(out, float(rho), gamma_fit, np.where(inside, s, np.nan), far)


def collar_length(result: CompletionResult, start):
    """Shortest path length under u~ from ``start`` to the outermost nodes of the region."""
    g = result.grid
    d = grid_distances_from(g, [start])[0]
    rim = g.boundary_mask.ravel() & g.domain.ravel()
    return float(np.min(d[rim]))
