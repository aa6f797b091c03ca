"""Scenario runners behind the command line: build models, run flows and checks, write artifacts."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import estimates as est
from . import ghlab, io, scheduler
from .config import ScenarioConfig
from .errors import ConfigError, InvalidInput
from .estimates import EstimateReport
from .flow import (BoundaryMode, SolverConfig, closed_form, closed_form_mode, rescale,
                   run_flow)
from .surface import (ConeSpace, ConformalGrid, FiniteMetricSpace, ModelMetric, RadialProfile,
                      SmoothedCone, SpaceForm, log_nodes, metric_closure, polar_pattern)

log = logging.getLogger(__name__)

COLUMNS = {
    "trajectory.csv": "t: time; total_area: area of the chart; min_K, max_K: extreme Gauss "
                      "curvature over valid nodes; min_u, max_u: extreme conformal factor",
    "profile_initial.csv": "r: chart radius; u: conformal factor; K: Gauss curvature",
    "profile_final.csv": "r: chart radius; u: conformal factor; K: Gauss curvature",
    "grid_initial.csv": "i, j: node indices; x, y: chart coordinates; u: conformal factor; "
                        "boundary: 1 on boundary nodes",
    "grid_final.csv": "i, j: node indices; x, y: chart coordinates; u: conformal factor; "
                      "boundary: 1 on boundary nodes",
    "closed_form.csv": "t: snapshot time; max_error: max |u - u_exact| over nodes",
    "inner_curvature.csv": "t: snapshot time; r: probe radius; two_t_K: 2 t K at the probe",
    "shi_levels.csv": "level: refinement level; nodes: profile nodes; statistic: sup |grad K| t^1.5",
    "hochard.csv": "rho: completion scale; h: grid spacing; gamma_fit: rho^2 max |K|; "
                   "unchanged: nodes with u unchanged",
    "collar.csv": "h: grid spacing; length: shortest path length from the centre to the rim",
    "gh.csv": "delta: smoothing radius; eps_star: GH upper estimate against the exact cone; "
              "ratio: eps_star / delta",
    "singular.csv": "point: label; lambda: rescaling; estimate: GH estimate against a flat disc; "
                    "verdict: verdict over all lambdas",
    "schedule.csv": "k: step; ell: existence time; r: ball radius",
    "radius_sweep.csv": "ell1: start time; steps: extension steps; loss: total radius loss; "
                        "budget: geometric bound B",
    "pyramid.csv": "k: ball radius index; T: time bound T_k; r_start: start radius; r_end: final radius",
    "net.csv": "index: point index; rho, theta: polar coordinates of the net point",
    "sample_fms.csv": "finite metric space: header n,basepoint; then the distance matrix rows",
    "study.csv": "level: refinement level; nodes: profile nodes; h: log-coordinate spacing; "
                 "error: max |u - u_exact| at the final time",
}


@dataclass
class Outcome:
    reports: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    status: str = "ok"
    message: str = ""

    @property
    def passed(self):
        return self.status == "ok" and all(r.passed for r in self.reports.values())


class Writer:
    """Writes artifacts under one directory and remembers them for the manifest."""

    def __init__(self, out: Path, outcome: Outcome):
        self.out = Path(out)
        self.outcome = outcome

    def _add(self, name):
        if name not in self.outcome.artifacts:
            self.outcome.artifacts.append(name)
        return self.out / name

    def csv(self, name, header, rows):
        io.write_csv(self._add(name), header, rows)

    def json(self, name, obj):
        io.write_json(self._add(name), obj)

    def trajectory(self, traj):
        io.write_trajectory_csv(self._add("trajectory.csv"), traj)
        first, last = traj.space(0), traj.space(len(traj) - 1)
        if isinstance(first, RadialProfile):
            io.write_profile_csv(self._add("profile_initial.csv"), first)
            io.write_profile_csv(self._add("profile_final.csv"), last)
        else:
            io.write_grid_csv(self._add("grid_initial.csv"), first)
            io.write_grid_csv(self._add("grid_final.csv"), last)

    def fms(self, name, fms):
        io.write_fms_csv(self._add(name), fms)

    def report(self, rep: EstimateReport, key):
        self.outcome.reports[key] = rep
        io.write_json(self._add(f"reports/{key}.json"), rep.to_dict())


def _solver(cfg: ScenarioConfig, **kw):
    s = cfg.solver
    return SolverConfig(scheme=s["scheme"], dt=s["dt"], dt_policy=s["dt_policy"],
                        newton_tol=s["newton_tol"], max_newton=s["max_newton"], **kw)


def _flat_report(name, margin, tolerance=0.0, constants=None, witnesses=None, notes=None):
    return EstimateReport(name, float(margin), tolerance, constants or {}, witnesses or {},
                          list(notes or []))


def _closed_form_report(traj, kind, initial, tol, w):
    rows = []
    for i in range(1, len(traj)):
        t = traj.times[i]
        ex = closed_form(kind, t, initial)
        rows.append((t, float(np.max(np.abs(traj.u(i) - ex.u)))))
    w.csv("closed_form.csv", ("t", "max_error"), rows)
    err = max(r[1] for r in rows)
    worst = max(rows, key=lambda r: r[1])
    return _flat_report("closed_form", tol - err, 0.0, {"max_error": err, "tolerance": tol},
                        {"t": worst[0]})


# flows
def sphere_profile(m):
    return ModelMetric("round-sphere", {"radius": m["radius"]}).profile(
        n=m["nodes"], s_range=(-m["s_max"], m["s_max"]))


def run_sphere(cfg, w, rng):
    m, s, p = cfg.model, cfg.solver, cfg.check_params
    prof = sphere_profile(m)
    A0 = prof.total_area()
    T = s["t_fraction"] * A0 / (8 * np.pi)
    traj = run_flow(prof, _solver(cfg), None, T)
    w.trajectory(traj)
    for c in cfg.checks:
        if c == "area-law":
            w.report(est.check_area_law(traj, p[c]["tolerance"]), c)
        elif c == "closed-form":
            w.report(_closed_form_report(traj, "sphere", prof, p[c]["tolerance"], w), c)
        elif c == "curvature-decay":
            w.report(est.fit_curvature_decay(traj, p[c]["tol"]), c)
        elif c == "metric-equivalence":
            w.report(est.check_metric_equivalence(traj, p[c]["M1"], p[c]["M2"]), c)
        elif c == "bishop-gromov":
            w.report(est.check_bishop_gromov(prof, "inner", p[c]["radii"], 0.0), c)
    return traj


def hyperbolic_profile(m):
    return ModelMetric("poincare-disc").profile(n=m["nodes"], s_range=(m["s_min"], np.log(m["r_max"])))


def _pairs(prof, rng, count, max_distance):
    """Random node pairs on one meridian with initial distance in (0, max_distance]."""
    pos = np.array([prof.position(i) for i in range(prof.n)])
    out = []
    tries = 0
    while len(out) < count and tries < 100 * count:
        tries += 1
        i, j = sorted(rng.choice(prof.n, 2, replace=False).tolist())
        if 0 < abs(pos[j] - pos[i]) <= max_distance:
            out.append((int(i), int(j)))
    if not out:
        raise InvalidInput("no node pairs within the requested distance")
    return out


def run_hyperbolic(cfg, w, rng):
    m, s, p = cfg.model, cfg.solver, cfg.check_params
    prof = hyperbolic_profile(m)
    traj = run_flow(prof, _solver(cfg), closed_form_mode("hyperbolic-plane"), s["T_end"])
    w.trajectory(traj)
    for c in cfg.checks:
        if c == "closed-form":
            w.report(_closed_form_report(traj, "hyperbolic-plane", prof, p[c]["tolerance"], w), c)
        elif c == "curvature-decay":
            w.report(est.fit_curvature_decay(traj, p[c]["tol"]), c)
        elif c == "distance-sandwich":
            q = p[c]
            pairs = _pairs(prof, rng, q["pairs"], q["max_distance"])
            c0 = est.fit_curvature_decay(traj).constants["c0"]
            rep = est.check_distance_sandwich(traj, pairs, q["alpha"], c0, q["beta"])
            rep.witnesses["pairs"] = pairs
            w.report(rep, c)
        elif c == "holder":
            q = p[c]
            pairs = _pairs(prof, rng, q["pairs"], q["max_distance"])
            rep = est.fit_holder(traj, pairs)
            rep.witnesses["pairs"] = pairs
            w.report(rep, c)
    return traj


def disc_space(m, nodes=None):
    if m["chart"] == "radial":
        n = nodes or m["nodes"]
        r = log_nodes(m["s_min"], np.log(m["r_max"] * m["radius"]), n)
        return RadialProfile(r, np.zeros(n), "plane-chart", "pole", "boundary")
    if m["chart"] == "grid":
        R = m["radius"]
        h = m["h"] if nodes is None else 2 * R / nodes
        return ConformalGrid.from_function(lambda X, Y: 0 * X, h, (-R, R), (-R, R), "disc",
                                           lambda X, Y: X * X + Y * Y < R * R)
    raise ConfigError(f"unknown chart {m['chart']!r}; choose radial or grid", "[model] chart")


def disc_mode(m):
    if m["boundary"] == "barrier":
        return BoundaryMode("complete-barrier", barrier="poincare", radius=m["radius"])
    if m["boundary"] == "fixed":
        return BoundaryMode("dirichlet-fixed")
    raise ConfigError(f"unknown boundary {m['boundary']!r}; choose barrier or fixed", "[model] boundary")


def _center_curvature(traj, i):
    K = traj.curvature(i)
    sp = traj.space(i)
    if isinstance(sp, RadialProfile):
        return float(K[0])
    ci, cj = sp.nearest_node(0.0, 0.0)
    return float(K[ci, cj])


def completeness_report(traj, q, dt):
    """min K >= -factor/(2t) after 10 steps, and a nearly flat centre early on."""
    burn_in = q["burn_in_steps"] * dt
    lower_gap, center = np.inf, 0.0
    wit = {}
    T_end = traj.times[-1]
    for i in range(1, len(traj)):
        t = traj.times[i]
        K = traj.curvature(i)
        Kv = K[np.isfinite(K)]
        if t >= burn_in * (1 - 1e-9):
            gap = float(Kv.min()) + q["lower_factor"] / (2 * t)
            if gap * 2 * t < lower_gap:
                lower_gap, wit["lower_t"] = gap * 2 * t, float(t)
        if t <= q["center_fraction"] * T_end + 1e-12:
            kc = abs(_center_curvature(traj, i))
            if kc > center:
                center, wit["center_t"] = kc, float(t)
    margin = min(lower_gap, q["center_tol"] - center)
    return _flat_report("completeness_bound", margin, 0.0,
                        {"min_2tK_plus_factor": lower_gap, "max_center_K": center,
                         "lower_factor": q["lower_factor"], "center_tol": q["center_tol"],
                         "burn_in": burn_in}, wit)


def hochard_report(q, w):
    rows, gammas, same = [], [], True
    R = q["region_radius"]
    for rho in q["rhos"]:
        h = rho / q["cells_per_rho"]
        L = R + 2 * h
        g = ConformalGrid.from_function(lambda X, Y: 0 * X, h, (-L, L), (-L, L))
        res = scheduler.hochard_complete(g, scheduler.Disc((0.0, 0.0), R), rho)
        same &= bool(np.array_equal(res.grid.u[res.unchanged], g.u[res.unchanged]))
        gammas.append(res.gamma_fit)
        rows.append((rho, h, res.gamma_fit, int(res.unchanged.sum())))
    w.csv("hochard.csv", ("rho", "h", "gamma_fit", "unchanged"), rows)
    spread = max(gammas) / min(gammas) - 1
    rho = q["collar_rho"]
    lengths = []
    Rc = 4 * rho
    for h in q["collar_hs"]:
        L = Rc + 2 * h
        g = ConformalGrid.from_function(lambda X, Y: 0 * X, h, (-L, L), (-L, L))
        res = scheduler.hochard_complete(g, scheduler.Disc((0.0, 0.0), Rc), rho)
        lengths.append(scheduler.collar_length(res, g.nearest_node(0.0, 0.0)))
    w.csv("collar.csv", ("h", "length"), zip(q["collar_hs"], lengths))
    slope = float(np.polyfit(np.log(1 / np.asarray(q["collar_hs"])), lengths, 1)[0])
    margin = min(q["stability"] - spread, slope - q["collar_factor"] * rho) if same else -1.0
    return _flat_report("hochard_completion", margin, 0.0,
                        {"gamma_fit": gammas, "spread": spread, "collar_slope": slope,
                         "collar_lengths": lengths, "identity_on_far_region": same,
                         "required_slope": q["collar_factor"] * rho})


def run_flat_disc(cfg, w, rng):
    m, s, p = cfg.model, cfg.solver, cfg.check_params
    mode = disc_mode(m)
    sp = disc_space(m)
    traj = run_flow(sp, _solver(cfg), mode, s["T_end"])
    w.trajectory(traj)
    for c in cfg.checks:
        q = p[c]
        if c == "completeness-bound":
            w.report(completeness_report(traj, q, s["dt"]), c)
        elif c == "curvature-decay":
            w.report(est.fit_curvature_decay(traj, q["tol"], q["t_min"]), c)
        elif c == "shi-decay":
            trajs, rows = [], []
            for lev in range(q["levels"]):
                nodes = (m["nodes"] - 1) * 2**lev + 1 if m["chart"] == "radial" else None
                if m["chart"] == "grid":
                    sp_l = disc_space({**m, "h": m["h"] / 2**lev})
                else:
                    sp_l = disc_space(m, nodes)
                trajs.append(traj if lev == 0 else run_flow(sp_l, _solver(cfg), mode, s["T_end"]))
            rr = q["interior_radius"]
            interior = (lambda r: r <= rr) if m["chart"] == "radial" else (lambda X, Y: X * X + Y * Y <= rr * rr)
            rep = est.check_shi_decay(trajs, 1, interior, q["t_min"], q["ratio_limit"])
            for lev, stat in enumerate(rep.constants["statistic"]):
                rows.append((lev, trajs[lev].space(0).u.size, float(stat)))
            w.csv("shi_levels.csv", ("level", "nodes", "statistic"), rows)
            w.report(rep, c)
        elif c == "hochard-completion":
            w.report(hochard_report(q, w), c)
        elif c == "static":
            dev = max(float(np.nanmax(np.abs(traj.u(i) - traj.u(0)))) for i in range(len(traj)))
            w.report(_flat_report("static", q["tolerance"] - dev, 0.0, {"max_change": dev}), c)
        elif c == "bishop-gromov":
            w.report(est.check_bishop_gromov(SpaceForm(0.0), (0.0, 0.0), q["radii"]), c)
    return traj


def punctured_profile(m):
    s = np.arange(m["s_min"], np.log(m["r_max"]) + 1e-9, m["ds"])
    return RadialProfile(np.exp(s), np.zeros_like(s), "plane-chart", "boundary", "boundary")


def run_punctured(cfg, w, rng):
    m, s, p = cfg.model, cfg.solver, cfg.check_params
    prof = punctured_profile(m)
    mode = {"inner": BoundaryMode("complete-barrier", barrier="cusp"),
            "outer": BoundaryMode("dirichlet-fixed")}
    rt = []
    if "inner-curvature" in cfg.checks:
        q = p["inner-curvature"]
        rt = np.geomspace(q["t_min"], q["t_max"], 6).tolist()
    traj = run_flow(prof, _solver(cfg, record_times=tuple(rt)), mode, s["T_end"])
    w.trajectory(traj)
    for c in cfg.checks:
        q = p[c]
        if c == "inner-curvature":
            rows = []
            for i in range(1, len(traj)):
                t = traj.times[i]
                if q["t_min"] * (1 - 1e-9) <= t <= q["t_max"] * (1 + 1e-9):
                    rows.append((t, float(prof.r[q["probe"]]), float(2 * t * traj.curvature(i)[q["probe"]])))
            w.csv("inner_curvature.csv", ("t", "r", "two_t_K"), rows)
            dev = max(abs(r[2] + 1) for r in rows)
            span = rows[-1][0] / rows[0][0] if rows else 0.0
            margin = q["tolerance"] - dev if span >= 10 * (1 - 1e-9) else -1.0
            w.report(_flat_report("inner_curvature", margin, 0.0,
                                  {"max_relative_deviation": dev, "time_span_ratio": span,
                                   "probe_radius": float(prof.r[q["probe"]])}), c)
        elif c == "curvature-decay":
            w.report(est.fit_curvature_decay(traj, q["tol"], q["t_min"]), c)
    return traj


def run_thin_cylinder(cfg, w, rng):
    m, s, p = cfg.model, cfg.solver, cfg.check_params
    model = ModelMetric("thin-cylinder", {"epsilon": m["epsilon"], "length": m["length"]})
    prof = model.profile(ds=m["ds"])
    traj = run_flow(prof, _solver(cfg), None, s["T_end"])
    w.trajectory(traj)
    ser = traj.series
    A0 = float(ser["total_area"][0])
    for c in cfg.checks:
        q = p[c]
        if c == "extinction":
            T = traj.extinction_time
            rel = abs(T / m["epsilon"] - 1) if np.isfinite(T) else np.inf
            w.report(_flat_report("extinction", q["tolerance"] - rel, 0.0,
                                  {"extinction_time": T, "epsilon": m["epsilon"],
                                   "relative_error": rel, "tolerance": q["tolerance"],
                                   "termination": traj.termination}), c)
        elif c == "curvature-blowup":
            ref = max(float(ser["min_K"][0]), 4 * np.pi / A0)
            late = float(ser["min_K"][-1])
            w.report(_flat_report("curvature_blowup", late / ref - q["factor"], 0.0,
                                  {"late_min_K": late, "reference_K": ref,
                                   "initial_min_K": float(ser["min_K"][0]), "factor": q["factor"]},
                                  {"t": float(ser["t"][-1])}), c)
        elif c == "area-law":
            w.report(est.check_area_law(traj, q["tolerance"]), c)
    return traj


# metric geometry
def _pattern_fms(space, radius, rings):
    pts = polar_pattern(radius, rings)
    return FiniteMetricSpace(metric_closure(space.pairwise(pts)), 0, points=pts)


def run_cone_sequence(cfg, w, rng):
    m, p = cfg.model, cfg.check_params
    c = m["c"]
    cone = ConeSpace(c)
    for ch in cfg.checks:
        q = p[ch]
        if ch == "gh-convergence":
            Y = _pattern_fms(cone, m["radius"], m["rings"])
            w.fms("sample_fms.csv", Y)
            rows = []
            for d in m["deltas"]:
                X = _pattern_fms(SmoothedCone(c, d), m["radius"], m["rings"])
                e = ghlab.gh_upper_estimate(X, Y, m["radius"]).epsilon
                rows.append((d, e, e / d))
            w.csv("gh.csv", ("delta", "eps_star", "ratio"), rows)
            order = sorted(rows, key=lambda r: -r[0])
            eps = [r[1] for r in order]
            dec = all(b < a for a, b in zip(eps, eps[1:]))
            ratio = max(r[2] for r in rows)
            w.report(_flat_report("gh_convergence", q["C"] - ratio if dec else -1.0, 0.0,
                                  {"C": q["C"], "max_ratio": ratio, "strictly_decreasing": dec,
                                   "eps_star": eps}), ch)
        elif ch == "bishop-gromov":
            worst, parts = np.inf, {}
            spaces = {"flat": SpaceForm(0.0), "cone": cone,
                      **{f"smoothed-{d}": SmoothedCone(c, d) for d in m["deltas"]}}
            for label, sp in spaces.items():
                rep = est.check_bishop_gromov(sp, None, q["radii"])
                parts[label] = rep.margin
                worst = min(worst, rep.margin)
            neg = est.check_bishop_gromov(SpaceForm(-1.0), None, q["radii"])
            parts["hyperbolic-control"] = neg.margin
            margin = worst if not neg.passed else -1.0
            w.report(_flat_report("bishop_gromov_suite", margin, 0.0,
                                  {"margins": parts, "negative_control_flagged": not neg.passed}), ch)
        elif ch == "avr":
            a = est.compute_avr(ConeSpace(q["c"]), q["radii"])
            rel = abs(a.limit / (np.pi * q["c"]) - 1)
            w.report(_flat_report("avr", q["tolerance"] - rel, 0.0,
                                  {"avr": a.limit, "target": np.pi * q["c"], "relative_error": rel}), ch)
        elif ch == "singular-detection":
            cases = {"vertex": (cone, (0.0, 0.0), "singular"),
                     "off-vertex": (cone, (q["off_vertex"], 0.0), "regular"),
                     "flat": (SpaceForm(0.0), (0.0, 0.0), "regular")}
            rows, ok = [], True
            verdicts = {}
            for label, (sp, pt, want) in cases.items():
                v = ghlab.detect_singular(sp, pt, q["lambdas"])
                verdicts[label] = v.verdict
                ok &= v.verdict == want
                rows += [(label, lam, e, v.verdict) for lam, e in zip(v.lambdas, v.estimates)]
            w.csv("singular.csv", ("point", "lambda", "estimate", "verdict"), rows)
            w.report(_flat_report("singular_detection", 0.0 if ok else -1.0, 0.0,
                                  {"verdicts": verdicts}), ch)
    return None


def _pack(m):
    return scheduler.wire_constants(m["v0"], m["alpha0"], m["C0"], m["T_hat"], m["S_hat"], m["gamma"])


def run_extension(cfg, w, rng):
    m, p = cfg.model, cfg.check_params
    pack = _pack(m)
    w.json("pack.json", pack.to_dict())
    sched = scheduler.run_schedule(m["ell1_fraction"] * pack.gate, m["r1"], m["r_target"], pack)
    w.csv("schedule.csv", ("k", "ell", "r"), sched.rows())
    w.json("schedule.json", sched.to_dict())
    for c in cfg.checks:
        q = p[c]
        if c == "schedule-exact":
            small = scheduler.SchedulePack(1.0, 1.0, 0.05)
            l2, r2 = scheduler.extend_once(0.1, 5.0, small)
            err = max(abs(l2 - 0.1 * (1 + 1 / 4)), abs(r2 - (5 - 6 * np.sqrt(l2))))
            q_ = scheduler.growth(pack.c0)
            N = sched.steps
            ell1 = sched.ell[0]
            count_ok = (not sched.success) or (
                ell1 * q_**N > pack.gate and (N == 0 or pack.gate >= ell1 * q_**(N - 1)))
            w.report(_flat_report("schedule_exact", -err if count_ok else -1.0, 0.0,
                                  {"ell2": l2, "r2": r2, "steps": N, "outcome": sched.outcome}), c)
        elif c == "radius-budget":
            B = scheduler.radius_budget(pack)
            rows = []
            for f in np.geomspace(1e-12, 1.0, q["sweep"]):
                s = scheduler.run_schedule(f * pack.gate, B + 2.0, 1.0, pack)
                rows.append((s.ell[0], s.steps, s.radius_loss, B))
            w.csv("radius_sweep.csv", ("ell1", "steps", "loss", "budget"), rows)
            worst = max(r[2] for r in rows)
            w.report(_flat_report("radius_budget", B - worst, 0.0, {"budget": B, "worst_loss": worst}), c)
        elif c == "shi-horizon":
            err = 0.0
            for K in q["K"]:
                err = max(err, abs(scheduler.shi_horizon(K, True) - 1 / (8 * K)) * 8 * K,
                          abs(scheduler.shi_horizon(K, terms=60) - 1 / (8 * K)) * 8 * K)
            w.report(_flat_report("shi_horizon", 1e-15 - err, 0.0, {"max_relative_error": err}), c)
    return None


def run_pyramid(cfg, w, rng):
    m, p = cfg.model, cfg.check_params
    pack = _pack(m)
    dom = scheduler.pyramid_build(m["k_max"], pack)
    w.csv("pyramid.csv", ("k", "T", "r_start", "r_end"), dom.rows())
    w.json("pyramid.json", {**dom.to_dict(), "pack": pack.to_dict()})
    for c in cfg.checks:
        if c == "pyramid-monotone":
            n = p[c]["samples"]
            ds = np.linspace(0, dom.k_max + 1, n)
            ts = np.linspace(0, 1.2 * float(dom.T[0]), n)
            M = np.array([[scheduler.pyramid_member(dom, d, t) for t in ts] for d in ds])
            # membership must be inherited by every smaller distance and time
            bad = int(np.sum(M[1:, :] & ~M[:-1, :]) + np.sum(M[:, 1:] & ~M[:, :-1]))
            nonincr = bool(np.all(np.diff(dom.T) <= 0))
            margin = 0.0 if bad == 0 and nonincr else -1.0
            w.report(_flat_report("pyramid_monotone", margin, 0.0,
                                  {"violations": bad, "T_nonincreasing": nonincr,
                                   "truncated_at": dom.truncated_at}), c)
    return None


def _gh_space(m):
    kind = m["kind"]
    if kind == "cone":
        return ConeSpace(m["c"])
    if kind == "smoothed-cone":
        return SmoothedCone(m["c"], m["delta"])
    if kind == "flat":
        return SpaceForm(0.0)
    raise ConfigError(f"unknown kind {kind!r}; choose cone, smoothed-cone or flat", "[model] kind")


def run_gh_report(cfg, w, rng):
    m, p = cfg.model, cfg.check_params
    sp = _gh_space(m)
    pt = (m["point_radius"], m["point_angle"])
    X = ghlab.ball_sample(sp, pt, m["radius"], m["rings"])
    w.fms("sample_fms.csv", X)
    net = ghlab.maximal_net(X, 0, m["radius"], m["eps"])
    w.csv("net.csv", ("index", "rho", "theta"),
          [(int(i), float(X.points[i][0]), float(X.points[i][1])) for i in net.indices])
    for c in cfg.checks:
        q = p[c]
        if c == "net-covering":
            w.report(_flat_report("net_covering", net.covering_radius - net.max_cover_distance, 0.0,
                                  net.to_dict()), c)
        elif c == "packing-bound":
            cfac = m["c"] if m["kind"] != "flat" else 1.0
            bound = ghlab.packing_cardinality_bound(m["radius"], m["eps"], np.pi * m["radius"] ** 2,
                                                    cfac * np.pi * (m["eps"] / 9) ** 2)
            w.report(_flat_report("packing_bound", bound - net.cardinality, 0.0,
                                  {"bound": bound, "cardinality": net.cardinality}), c)
        elif c == "gh-self":
            e = ghlab.gh_upper_estimate(X, X, m["radius"]).epsilon
            w.report(_flat_report("gh_self", net.covering_radius - e, 0.0,
                                  {"eps_star": e, "covering_radius": net.covering_radius}), c)
        elif c == "singular-detection":
            v = ghlab.detect_singular(sp, pt, q["lambdas"])
            want = q["expect"]
            if want == "auto":
                want = "singular" if m["kind"] == "cone" and pt[0] == 0 else "regular"
            w.report(_flat_report("singular_detection", 0.0 if v.verdict == want else -1.0, 0.0,
                                  {**v.to_dict(), "expected": want}), c)
    return None


RUNNERS = {
    "sphere": run_sphere, "hyperbolic": run_hyperbolic, "flat-disc-complete": run_flat_disc,
    "punctured-plane": run_punctured, "thin-cylinder": run_thin_cylinder,
    "cone-sequence": run_cone_sequence, "extension-schedule": run_extension,
    "pyramid": run_pyramid, "gh-report": run_gh_report,
}


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def finalize(cfg: ScenarioConfig, out: Path, outcome: Outcome, kind="run"):
    """Summary, run manifest and column documentation."""
    out = Path(out)
    summary = {"scenario": cfg.name, "kind": kind, "status": outcome.status,
               "message": outcome.message, "pass": outcome.passed,
               "checks": {k: {"pass": r.passed, "margin": r.margin, "tolerance": r.tolerance}
                          for k, r in outcome.reports.items()}}
    io.write_json(out / "summary.json", summary)
    files = sorted(set(outcome.artifacts) | {"summary.json"})
    manifest = {"package": "riccilab", "version": __version__, "config": cfg.to_dict(),
                "files": {f: _digest(out / f) for f in files}}
    io.write_json(out / "run.json", manifest)
    lines = ["Artifacts of one scenario run. CSV columns by file:", ""]
    for f in files:
        if f.endswith(".csv"):
            lines.append(f"{f}: {COLUMNS.get(f, 'see header')}")
    lines += ["", "summary.json: overall pass flag and per-check margins",
              "run.json: configuration echo, package version and SHA-256 of every artifact",
              "reports/*.json: one estimate report per check (margin, tolerance, constants, witnesses)",
              "figures/*.png: written by the report verb", ""]
    io.atomic_write(out / "MANIFEST", "\n".join(lines))
    return summary


# refinement studies
def _study_case(cfg, nodes):
    m = cfg.model
    if cfg.name == "sphere":
        prof = sphere_profile({**m, "nodes": nodes})
        return prof, None, lambda t: closed_form("sphere", t, prof), (2 * m["s_max"]) / (nodes - 1)
    if cfg.name == "hyperbolic":
        prof = hyperbolic_profile({**m, "nodes": nodes})
        return (prof, closed_form_mode("hyperbolic-plane"),
                lambda t: closed_form("hyperbolic-plane", t, prof),
                (np.log(m["r_max"]) - m["s_min"]) / (nodes - 1))
    if cfg.name == "flat-disc-complete":
        if m["boundary"] != "fixed":
            raise ConfigError("the refinement study needs a closed-form oracle; set boundary = fixed",
                              f"{cfg.source} [model] boundary")
        sp = disc_space({**m, "chart": "radial"}, nodes)
        return sp, disc_mode(m), lambda t: sp, (np.log(m["r_max"] * m["radius"]) - m["s_min"]) / (nodes - 1)
    raise ConfigError(f"scenario {cfg.name!r} has no refinement study", cfg.source)


def convergence_study(cfg: ScenarioConfig, levels: int, w: Writer):
    st = cfg.study
    if levels < 3:
        raise ConfigError("a refinement study needs at least 3 levels", f"{cfg.source} [study] levels")
    rows = []
    for lev in range(levels):
        nodes = (st["base_nodes"] - 1) * 2**lev + 1
        sp, mode, exact, h = _study_case(cfg, nodes)
        traj = run_flow(sp, SolverConfig(dt=st["dt"]), mode, st["T_end"])
        err = float(np.max(np.abs(traj.u(len(traj) - 1) - exact(traj.times[-1]).u)))
        rows.append((lev, nodes, h, err))
    w.csv("study.csv", ("level", "nodes", "h", "error"), rows)
    errs = np.array([r[3] for r in rows])
    hs = np.array([r[2] for r in rows])
    if np.all(errs <= 1e-12):
        order, margin = np.inf, 0.0
    else:
        order = float(np.polyfit(np.log(hs), np.log(np.maximum(errs, 1e-300)), 1)[0])
        margin = min(order - st["min_order"], st["max_error"] - errs[-1])
    rep = _flat_report("convergence", margin, 0.0,
                       {"order": order, "errors": errs, "h": hs, "finest_error": float(errs[-1]),
                        "min_order": st["min_order"], "max_error": st["max_error"]})
    w.report(rep, "convergence")
    return rep
