"""Two-dimensional Ricci flow u_t = e^{-2u} Δu on conformal grids and radial profiles.

Both discretizations share one finite-volume form.  With x the nodal
unknown (x = u on grids, x = w = u + ln r on radial profiles), masses m,
a symmetric graph Laplacian A and closure fluxes b, the semi-discrete flow
is the conservative law

    m · d/dt e^{2x} = 2 (A x + b),

so the discrete area Σ m e^{2x} changes exactly by 2 Σ (A x + b), the
discrete Gauss-Bonnet integral.  The implicit scheme is backward Euler on
this law solved by Newton's method; it is exact in time for the shrinking
sphere and expanding hyperbolic solutions, leaving only spatial error.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from .errors import InvalidInput, RefuseStep, SolverFailure
from .surface.grid import ConformalGrid
from .surface.models import ModelMetric
from .surface.radial import CURVATURE_CUTOFF, RadialProfile

log = logging.getLogger(__name__)

SCHEMES = ("explicit-euler", "implicit-euler")
DT_POLICIES = ("fixed", "cfl")
MODE_KINDS = ("dirichlet-fixed", "complete-barrier", "zero-flux")
BARRIERS = ("poincare", "cusp")


@dataclass(frozen=True)
class BoundaryMode:
    """How boundary nodes evolve.

    ``dirichlet-fixed``: u on the boundary is ``value(t, *position)``;
    without ``value`` it is the initial boundary value plus ``drift(t)``
    (constant when ``drift`` is None).
    ``complete-barrier``: u = ½ ln(2t) + P, where P is the complete
    hyperbolic factor of the chart (``barrier="poincare"`` for a disc of
    radius ``radius``, ``"cusp"`` for a punctured disc), i.e. the metric of
    constant curvature -1/(2t).  At t = 0 the barrier is seeded at dt/2.
    ``zero-flux``: boundary nodes are ordinary unknowns with no outward flux.
    """

    kind: str = "dirichlet-fixed"
    value: Callable | None = None
    drift: Callable | None = None
    barrier: str = "poincare"
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in MODE_KINDS:
            raise InvalidInput(f"unknown boundary mode {self.kind!r}")
        if self.barrier not in BARRIERS:
            raise InvalidInput(f"unknown barrier profile {self.barrier!r}")
        if self.radius <= 0:
            raise InvalidInput("barrier radius must be positive")

    def barrier_factor(self, r):
        """Complete hyperbolic factor P (curvature -1) at chart radius r."""
        r = np.asarray(r, float)
        if self.barrier == "poincare":
            R = self.radius
            return np.log(2 * R / (R * R - r * r))
        return -np.log(r * np.log(1.0 / r))

    def boundary_u(self, t, pos, u_init, dt):
        if self.kind == "dirichlet-fixed":
            if self.value is None:
                return u_init if self.drift is None else u_init + self.drift(t)
            return np.broadcast_to(np.asarray(self.value(t, *pos), float), u_init.shape).copy()
        if self.kind == "complete-barrier":
            r = np.hypot(*pos) if len(pos) == 2 else pos[0]
            teff = max(t, 0.5 * dt)
            return 0.5 * np.log(2 * teff) + self.barrier_factor(r)
        raise AssertionError(self.kind)


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping parameters.

    ``dt_policy="cfl"`` takes dt = min(dt, safety·CFL) each step for the
    explicit scheme and dt = min(dt, implicit_cfl_factor·CFL) for the
    implicit one.  Explicit steps above safety·CFL are refused.
    """

    scheme: str = "implicit-euler"
    dt: float = 1e-3
    dt_policy: str = "fixed"
    safety: float = 0.9
    implicit_cfl_factor: float = 1e3
    newton_tol: float = 1e-10
    max_newton: int = 50
    extinction_fraction: float = 1e-3
    blowup_floor: float = 1e-12
    record_every: int | None = None
    record_times: tuple = ()
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidInput(f"unknown scheme {self.scheme!r}")
        if self.dt_policy not in DT_POLICIES:
            raise InvalidInput(f"unknown dt policy {self.dt_policy!r}")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise InvalidInput("dt must be positive")
        if not 0 < self.safety <= 1:
            raise InvalidInput("CFL safety factor must lie in (0, 1]")
        if self.newton_tol <= 0 or self.max_newton < 1:
            raise InvalidInput("Newton tolerance and iteration cap must be positive")
        object.__setattr__(self, "record_times", tuple(sorted(float(t) for t in self.record_times)))

    def describe(self):
        return {"scheme": self.scheme, "dt": self.dt, "dt_policy": self.dt_policy,
                "safety": self.safety, "newton_tol": self.newton_tol,
                "max_newton": self.max_newton,
                "extinction_fraction": self.extinction_fraction,
                "blowup_floor": self.blowup_floor}


class _Discretization:
    """Finite-volume view of a grid or profile: unknown x, masses, Laplacian, closures."""

    def __init__(self, space, mode):
        self.space = space
        if isinstance(space, ConformalGrid):
            self._init_grid(space)
        elif isinstance(space, RadialProfile):
            self._init_radial(space)
        else:
            raise InvalidInput(f"cannot evolve {type(space).__name__}")
        self._init_modes(mode)

    def _init_grid(self, g):
        self.kind = "grid"
        dom = g.domain
        nx, ny = g.shape
        self.index = -np.ones(g.shape, int)
        self.index[dom] = np.arange(int(dom.sum()))
        n = int(dom.sum())
        rows, cols = [], []
        for di, dj in ((1, 0), (0, 1)):
            a = dom[: nx - di, : ny - dj] & dom[di:, dj:]
            rows.append(self.index[: nx - di, : ny - dj][a])
            cols.append(self.index[di:, dj:][a])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        adj = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
        adj = adj + adj.T
        self.A = (adj - sp.diags(np.asarray(adj.sum(axis=1)).ravel())).tocsr()
        self.m = np.full(n, g.h**2)
        self.b = np.zeros(n)
        self.area_factor = 1.0
        self.chart_boundary = g.boundary_mask[dom]
        X, Y = g.coords()
        self.pos = (X[dom], Y[dom])
        self.x0 = g.u[dom].copy()
        self.offset = np.zeros(n)
        self.ends = None

    def _init_radial(self, p):
        self.kind = "radial"
        n = p.n
        gaps = np.diff(p.s)
        cond = 1.0 / gaps
        self.A = sp.diags([cond, -np.r_[cond, 0] - np.r_[0, cond], cond], [-1, 0, 1]).tocsr()
        self._cond = cond
        self.m = np.array(p.masses())
        self.b = p.closure_flux()
        self.area_factor = 2 * np.pi
        self.chart_boundary = p.boundary_nodes()
        self.pos = (p.r,)
        self.offset = p.s.copy()
        self.x0 = p.w.copy()
        self.ends = {"inner": 0, "outer": n - 1}

    def _init_modes(self, mode):
        n = self.m.size
        self.fixed = np.zeros(n, bool)
        self.node_modes = []
        if isinstance(mode, dict):
            if self.kind != "radial":
                raise InvalidInput("per-end boundary modes apply to radial profiles only")
            unknown = set(mode) - {"inner", "outer"}
            if unknown:
                raise InvalidInput(f"unknown profile ends {sorted(unknown)}")
            pairs = [(mode.get(e), np.array([self.ends[e]])) for e in ("inner", "outer")]
            pairs = [(md, idx) for md, idx in pairs if md is not None and self.chart_boundary[idx[0]]]
        else:
            pairs = [(mode, np.flatnonzero(self.chart_boundary))]
        for md, idx in pairs:
            if md.kind == "zero-flux" or idx.size == 0:
                continue
            self.fixed[idx] = True
            self.node_modes.append((md, idx))
        self.free = ~self.fixed
        self.u_init = self.x0 - self.offset

    def boundary_x(self, t, dt):
        x = np.empty(self.m.size)
        for md, idx in self.node_modes:
            pos = tuple(p[idx] for p in self.pos)
            x[idx] = md.boundary_u(t, pos, self.u_init[idx], dt) + self.offset[idx]
        return x

    def area(self, x):
        return float(self.area_factor * np.sum(self.m * np.exp(2 * x)))

    def flux(self, x):
        return self.A @ x + self.b

    def cfl_limit(self, x):
        diag = -self.A.diagonal()
        with np.errstate(divide="ignore"):
            lim = self.m * np.exp(2 * x) / diag
        lim = lim[self.free & (diag > 0)]
        return float(lim.min()) if lim.size else np.inf

    def valid_k(self, x):
        v = np.exp(2 * x)
        ok = ~self.chart_boundary & ~self.fixed
        if self.kind == "radial":
            ok &= v >= CURVATURE_CUTOFF * v.max()
        return ok

    def spatial_curvature(self, x):
        K = -self.flux(x) / (self.m * np.exp(2 * x))
        K[~self.valid_k(x)] = np.nan
        return K

    def step_curvature(self, x, xn, dt):
        """Curvature at the new level from the backward-Euler identity (no cancellation)."""
        K = -(-np.expm1(-2 * (x - xn))) / (2 * dt)
        K[~self.valid_k(x)] = np.nan
        return K

    def significant(self, x, rel=1e-9):
        mv = self.m * np.exp(2 * x)
        return mv >= rel * mv.max()

    def to_space(self, x):
        if self.kind == "grid":
            u = np.full(self.space.shape, np.nan)
            u[self.space.domain] = x
            return self.space.with_u(u)
        return self.space.with_w(x)

    def field(self, values):
        """Nodal values in the layout of the space (2D with NaN outside a grid domain)."""
        if self.kind == "grid":
            out = np.full(self.space.shape, np.nan)
            out[self.space.domain] = values
            return out
        return values

    def u_of(self, x):
        return x - self.offset

    # steppers
    def explicit(self, x, dt, t_new, safety):
        lim = safety * self.cfl_limit(x)
        if dt > lim * (1 + 1e-12):
            raise RefuseStep(f"dt={dt:.3e} exceeds the stability bound {lim:.3e}")
        xn = x + dt * self.flux(x) / (self.m * np.exp(2 * x))
        xb = self.boundary_x(t_new, dt)
        xn[self.fixed] = xb[self.fixed]
        return xn, 0

    def implicit(self, x, dt, t_new, tol, max_iter):
        vn = np.exp(2 * x)
        xn = x.copy()
        xb = self.boundary_x(t_new, dt)
        xn[self.fixed] = xb[self.fixed]
        f = self.free
        scale = float(np.max(self.m[f] * vn[f])) if f.any() else 1.0
        if self.kind == "grid":
            Aff = self._free_block()
        res = np.inf
        for it in range(1, max_iter + 1):
            v = np.exp(2 * xn)
            F = (self.m * (v - vn) - 2 * dt * self.flux(xn))[f]
            res = float(np.max(np.abs(F))) / scale if F.size else 0.0
            if res <= tol:
                return xn, it - 1
            diag = 2 * self.m[f] * v[f]
            if self.kind == "radial":
                dx = self._banded_solve(diag, dt, f, -F)
            else:
                dx = self._spd_solve(sp.diags(diag, format="csr") + dt * Aff, -F)
            if not np.all(np.isfinite(dx)):
                break
            xn[f] += dx
            if np.max(np.abs(dx)) < 1e-14 * max(1.0, float(np.max(np.abs(xn[f])))):
                return xn, it
        raise SolverFailure(f"Newton did not converge at t={t_new:.6g} (residual {res:.3e})",
                            residual=res)

    def _free_block(self):
        if getattr(self, "_aff", None) is None:
            self._aff = (-2.0 * self.A[self.free][:, self.free]).tocsr()
        return self._aff

    @staticmethod
    def _spd_solve(J, rhs):
        # the Jacobian is SPD and diagonally dominant for small dt: Jacobi-CG
        # converges in a few dozen sweeps; fall back to a direct solve
        dx, info = spla.cg(J, rhs, rtol=1e-13, atol=0.0, maxiter=2000,
                           M=sp.diags(1.0 / J.diagonal()))
        if info != 0:
            dx = spla.spsolve(J.tocsc(), rhs)
        return dx

    def _banded_solve(self, diag, dt, f, rhs):
        # tridiagonal Jacobian diag(2 m v) - 2 dt A restricted to free nodes
        n = self.m.size
        full_diag = np.zeros(n)
        full_diag[f] = diag
        a_diag = self.A.diagonal()
        d = full_diag - 2 * dt * a_diag
        off = -2 * dt * self._cond
        up = off.copy()
        lo = off.copy()
        d[~f] = 1.0
        up[~f[:-1]] = 0.0
        lo[~f[1:]] = 0.0
        ab = np.zeros((3, n))
        ab[0, 1:] = up
        ab[1] = d
        ab[2, :-1] = lo
        full_rhs = np.zeros(n)
        full_rhs[f] = rhs
        sol = solve_banded((1, 1), ab, full_rhs)
        return sol[f]


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """Snapshots and per-step diagnostics of one flow run.

    Data are stored for the unscaled run; ``scale`` applies the parabolic
    rescaling g -> λ g(t/λ) on access, so rescalings compose exactly.
    """

    base_times: np.ndarray
    base_spaces: tuple
    base_curvatures: tuple
    base_series: dict
    boundary_mode: object
    config: SolverConfig
    termination: str = "completed"
    termination_time: float = np.nan
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.base_times)

    @property
    def times(self):
        return self.base_times * self.scale

    @property
    def shift(self):
        return 0.5 * np.log(self.scale)

    def space(self, i):
        s = self.base_spaces[i]
        return s if self.scale == 1.0 else s.shifted(self.shift)

    def snapshot(self, i):
        return float(self.times[i]), self.space(i)

    def curvature(self, i):
        K = self.base_curvatures[i]
        return K if self.scale == 1.0 else K / self.scale

    def u(self, i):
        return self.space(i).u

    @property
    def series(self):
        s = self.base_series
        lam = self.scale
        if lam == 1.0:
            return dict(s)
        return {"t": s["t"] * lam, "total_area": s["total_area"] * lam,
                "min_K": s["min_K"] / lam, "max_K": s["max_K"] / lam,
                "min_u": s["min_u"] + self.shift, "max_u": s["max_u"] + self.shift}

    @property
    def extinction_time(self):
        return self.termination_time * self.scale if self.termination == "extinction" else np.nan

    @property
    def topology(self):
        s = self.base_spaces[0]
        return getattr(s, "topology", "plane-chart")


def rescale(traj: FlowTrajectory, lam: float) -> FlowTrajectory:
    """Parabolic rescaling: snapshot at time λt holds u(t) + ½ ln λ."""
    if not (lam > 0 and np.isfinite(lam)):
        raise InvalidInput("rescaling factor must be positive")
    return replace(traj, scale=traj.scale * lam)


def _series_row(disc, x, K, t):
    u = disc.u_of(x)
    sig = disc.significant(x) if disc.kind == "radial" else np.ones(x.size, bool)
    Kv = K[np.isfinite(K)]
    return (t, disc.area(x),
            float(Kv.min()) if Kv.size else np.nan, float(Kv.max()) if Kv.size else np.nan,
            float(u[sig].min()), float(u[sig].max()))


def _choose_dt(disc, x, config, remaining):
    dt = config.dt
    if config.dt_policy == "cfl":
        lim = disc.cfl_limit(x)
        factor = config.safety if config.scheme == "explicit-euler" else config.implicit_cfl_factor
        dt = min(dt, factor * lim)
    return min(dt, remaining)


def step(space, dt, config: SolverConfig | None = None, mode=None, t=0.0):
    """Advance a grid or profile from time t to t + dt."""
    config = config or SolverConfig()
    mode = mode or BoundaryMode("zero-flux")
    if not (dt > 0):
        raise InvalidInput("dt must be positive")
    disc = _Discretization(space, mode)
    x = disc.x0
    if config.scheme == "explicit-euler":
        xn, _ = disc.explicit(x, dt, t + dt, config.safety)
    else:
        xn, _ = disc.implicit(x, dt, t + dt, config.newton_tol, config.max_newton)
    return disc.to_space(xn)


def run_flow(initial, config: SolverConfig | None = None, mode=None, T_end=1.0):
    """Evolve ``initial`` up to T_end, extinction or blow-up.

    Returns a FlowTrajectory; a SolverFailure carries the partial trajectory
    in its ``trajectory`` attribute.
    """
    config = config or SolverConfig()
    mode = mode if mode is not None else BoundaryMode("zero-flux")
    if not T_end > 0:
        raise InvalidInput("T_end must be positive")
    disc = _Discretization(initial, mode)
    x = disc.x0.copy()
    dt0 = _choose_dt(disc, x, config, T_end)
    xb = disc.boundary_x(0.0, dt0)
    x[disc.fixed] = xb[disc.fixed]
    A0 = disc.area(x)
    K = disc.spatial_curvature(x)

    times, spaces, curvs = [0.0], [disc.to_space(x)], [disc.field(K)]
    rows = [_series_row(disc, x, K, 0.0)]
    record_every = config.record_every
    if record_every is None and not config.record_times:
        record_every = max(1, int(round(T_end / config.dt / 100)))
    pending = [tt for tt in config.record_times if 0 < tt <= T_end]
    t = 0.0
    nstep = 0
    termination, t_term = "completed", T_end

    def build(term, tt):
        series = {k: np.array(v) for k, v in zip(("t", "total_area", "min_K", "max_K", "min_u", "max_u"),
                                                  zip(*rows))}
        return FlowTrajectory(np.array(times), tuple(spaces), tuple(curvs), series, mode, config,
                              term, tt, 1.0, {"chart": disc.kind, "initial_area": A0,
                                              "steps": nstep})

    while t < T_end * (1 - 1e-12):
        remaining = T_end - t
        if pending:
            remaining = min(remaining, pending[0] - t)
        dt = _choose_dt(disc, x, config, remaining)
        if dt <= 1e-15 * max(1.0, T_end):
            # a record time coincides with t up to rounding
            dt = _choose_dt(disc, x, config, T_end - t)
        t_new = t + dt
        try:
            if config.scheme == "explicit-euler":
                xn, _ = disc.explicit(x, dt, t_new, config.safety)
                Kn = disc.spatial_curvature(xn)
            else:
                xn, _ = disc.implicit(x, dt, t_new, config.newton_tol, config.max_newton)
                Kn = disc.step_curvature(xn, x, dt)
        except SolverFailure as exc:
            exc.trajectory = build("solver-failure", t)
            raise
        if not np.all(np.isfinite(xn)):
            err = SolverFailure(f"non-finite conformal factor at t={t_new:.6g}")
            err.trajectory = build("solver-failure", t)
            raise err
        x, t = xn, t_new
        nstep += 1
        if nstep > config.max_steps:
            raise SolverFailure("step limit exceeded")
        rows.append(_series_row(disc, x, Kn, t))
        area_now = rows[-1][1]
        v = np.exp(2 * x)
        # on profiles only nodes carrying a visible share of the area can blow up;
        # the closing tails are exponentially small by construction
        check = disc.significant(x, 1e-6) if disc.kind == "radial" else np.ones(x.size, bool)
        ended = None
        if area_now < config.extinction_fraction * A0:
            ended = "extinction"
        elif float(v[check].min()) < config.blowup_floor:
            ended = "blow-up"
        hit_record = bool(pending) and t >= pending[0] * (1 - 1e-12)
        if hit_record:
            pending.pop(0)
        if ended or hit_record or (record_every and nstep % record_every == 0) \
                or t >= T_end * (1 - 1e-12):
            times.append(t)
            spaces.append(disc.to_space(x))
            curvs.append(disc.field(Kn))
        if ended:
            termination, t_term = ended, t
            log.info("flow stopped by %s at t=%.6g", ended, t)
            break
    return build(termination, t_term if termination != "completed" else t)


def closed_form(kind, t, initial=None):
    """Exact conformal factor at time t for the constant-curvature flows.

    sphere: u0 + ½ ln(1 - 2 K0 t); hyperbolic-plane and hyperbolic-cusp:
    u0 + ½ ln(1 + 2t).  ``initial`` defaults to the model's profile.
    """
    if kind == "sphere":
        base = initial if initial is not None else ModelMetric("round-sphere").profile()
        k0 = 1.0 if initial is None else _sphere_curvature(initial)
        lam = 1 - 2 * k0 * t
        if not lam > 0:
            raise InvalidInput(f"t={t} is beyond the sphere's lifespan {1 / (2 * k0)}")
    elif kind in ("hyperbolic-plane", "hyperbolic-cusp"):
        model = "poincare-disc" if kind == "hyperbolic-plane" else "hyperbolic-cusp"
        base = initial if initial is not None else ModelMetric(model).profile()
        lam = 1 + 2 * t
        if not lam > 0:
            raise InvalidInput(f"t={t} is before the solution starts")
    else:
        raise InvalidInput(f"no closed form for {kind!r}")
    if t < 0 and kind == "sphere":
        raise InvalidInput("t must be nonnegative")
    return base.shifted(0.5 * np.log(lam))


def _sphere_curvature(space):
    if isinstance(space, RadialProfile) and space.topology == "sphere-double-chart":
        return 4 * np.pi / space.total_area()
    return 1.0


def closed_form_mode(kind, k0=1.0):
    """Dirichlet data that follow the closed-form solution on the chart boundary."""
    if kind == "sphere":
        return BoundaryMode("dirichlet-fixed", drift=lambda t: 0.5 * np.log(1 - 2 * k0 * t))
    if kind in ("hyperbolic-plane", "hyperbolic-cusp"):
        return BoundaryMode("dirichlet-fixed", drift=lambda t: 0.5 * np.log(1 + 2 * t))
    raise InvalidInput(f"no closed form for {kind!r}")
