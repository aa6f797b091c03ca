"""INI scenario configuration: schema, defaults and located parse errors.

A config file has these sections::

    [scenario]      name, seed, out
    [model]         scenario-specific geometry parameters
    [solver]        time-stepping parameters
    [checks]        enabled = comma-separated check names
    [check.NAME]    parameters of one check (tolerances live here)
    [study]         refinement-study parameters

Every key is validated against the scenario's schema; unknown keys and bad
values raise ConfigError naming the file, line, section and key.
"""
from __future__ import annotations

import configparser
import copy
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

FLOAT, INT, STR, FLOATS, BOOL = "float", "int", "str", "floats", "bool"

PACK = {"v0": (FLOAT, 1.0), "alpha0": (FLOAT, 1.0), "C0": (FLOAT, 2.0), "T_hat": (FLOAT, 1.0),
        "S_hat": (FLOAT, 1.0), "gamma": (FLOAT, 2.0)}

FLOW_SOLVER = {"dt": (FLOAT, 1e-3), "T_end": (FLOAT, 0.5), "scheme": (STR, "implicit-euler"),
               "dt_policy": (STR, "fixed"), "newton_tol": (FLOAT, 1e-10), "max_newton": (INT, 50)}

SCHEMA = {
    "sphere": {
        "model": {"radius": (FLOAT, 1.0), "nodes": (INT, 2049), "s_max": (FLOAT, 6.0)},
        "solver": {**FLOW_SOLVER, "t_fraction": (FLOAT, 0.8)},
        "checks": {
            "area-law": {"tolerance": (FLOAT, 0.01)},
            "closed-form": {"tolerance": (FLOAT, 1e-3)},
            "curvature-decay": {"tol": (FLOAT, 0.1)},
            "metric-equivalence": {"M1": (FLOAT, 0.0), "M2": (FLOAT, 5.0)},
            "bishop-gromov": {"radii": (FLOATS, [0.1, 0.5, 1.0, 2.0])},
        },
        "default_checks": ["area-law", "closed-form", "curvature-decay"],
        "study": {"base_nodes": (INT, 129), "T_end": (FLOAT, 0.1), "dt": (FLOAT, 1e-3)},
    },
    "hyperbolic": {
        "model": {"nodes": (INT, 1025), "s_min": (FLOAT, -8.0), "r_max": (FLOAT, 0.9)},
        "solver": {**FLOW_SOLVER},
        "checks": {
            "closed-form": {"tolerance": (FLOAT, 1e-3)},
            "curvature-decay": {"tol": (FLOAT, 0.1)},
            "distance-sandwich": {"alpha": (FLOAT, 1.0), "beta": (FLOAT, 2.0), "pairs": (INT, 8),
                                  "max_distance": (FLOAT, 1.0)},
            "holder": {"pairs": (INT, 8), "max_distance": (FLOAT, 1.0)},
        },
        "default_checks": ["closed-form", "curvature-decay", "distance-sandwich"],
        "study": {"base_nodes": (INT, 129), "T_end": (FLOAT, 0.1), "dt": (FLOAT, 1e-3)},
    },
    "flat-disc-complete": {
        "model": {"chart": (STR, "radial"), "boundary": (STR, "barrier"), "radius": (FLOAT, 1.0),
                  "r_max": (FLOAT, 0.98), "s_min": (FLOAT, -8.0), "nodes": (INT, 401),
                  "h": (FLOAT, 0.05)},
        "solver": {**FLOW_SOLVER, "dt": (FLOAT, 1e-4), "T_end": (FLOAT, 0.1)},
        "checks": {
            "completeness-bound": {"lower_factor": (FLOAT, 1.1), "burn_in_steps": (INT, 10),
                                   "center_tol": (FLOAT, 0.05), "center_fraction": (FLOAT, 0.1)},
            "curvature-decay": {"tol": (FLOAT, 0.1), "t_min": (FLOAT, 1e-3)},
            "shi-decay": {"levels": (INT, 3), "ratio_limit": (FLOAT, 1.2),
                          "interior_radius": (FLOAT, 0.5), "t_min": (FLOAT, 0.01)},
            "hochard-completion": {"rhos": (FLOATS, [1.0, 0.5, 0.25]), "region_radius": (FLOAT, 4.0),
                                   "cells_per_rho": (INT, 20), "stability": (FLOAT, 0.2),
                                   "collar_rho": (FLOAT, 0.5), "collar_hs": (FLOATS, [0.1, 0.05, 0.025]),
                                   "collar_factor": (FLOAT, 0.5)},
            "static": {"tolerance": (FLOAT, 1e-12)},
            "bishop-gromov": {"radii": (FLOATS, [0.1, 0.25, 0.5])},
        },
        "default_checks": ["completeness-bound", "curvature-decay"],
        "study": {"base_nodes": (INT, 101), "T_end": (FLOAT, 0.05), "dt": (FLOAT, 1e-3)},
    },
    "punctured-plane": {
        "model": {"s_min": (FLOAT, -12.0), "r_max": (FLOAT, 10.0), "ds": (FLOAT, 0.05)},
        "solver": {**FLOW_SOLVER, "dt": (FLOAT, 1e-4), "T_end": (FLOAT, 0.1)},
        "checks": {
            "inner-curvature": {"tolerance": (FLOAT, 0.2), "probe": (INT, 10),
                                "t_min": (FLOAT, 0.01), "t_max": (FLOAT, 0.1)},
            "curvature-decay": {"tol": (FLOAT, 0.1), "t_min": (FLOAT, 0.01)},
        },
        "default_checks": ["inner-curvature"],
    },
    "thin-cylinder": {
        "model": {"epsilon": (FLOAT, 0.01), "length": (FLOAT, 2.0), "ds": (FLOAT, 0.05)},
        "solver": {**FLOW_SOLVER, "dt": (FLOAT, 2e-6), "T_end": (FLOAT, 0.02)},
        "checks": {
            "extinction": {"tolerance": (FLOAT, 0.05)},
            "curvature-blowup": {"factor": (FLOAT, 100.0)},
            "area-law": {"tolerance": (FLOAT, 0.01)},
        },
        "default_checks": ["extinction", "curvature-blowup"],
    },
    "cone-sequence": {
        "model": {"c": (FLOAT, 0.7), "deltas": (FLOATS, [0.2, 0.1, 0.05]), "radius": (FLOAT, 1.0),
                  "rings": (INT, 4)},
        "solver": {},
        "checks": {
            "gh-convergence": {"C": (FLOAT, 1.0)},
            "bishop-gromov": {"radii": (FLOATS, [0.01, 0.05, 0.1, 0.5, 1.0, 2.0])},
            "avr": {"c": (FLOAT, 0.5), "tolerance": (FLOAT, 0.03), "radii": (FLOATS, [1.0, 2.0, 4.0, 8.0])},
            "singular-detection": {"lambdas": (FLOATS, [4.0, 8.0, 16.0]), "off_vertex": (FLOAT, 1.0)},
        },
        "default_checks": ["gh-convergence", "bishop-gromov", "avr", "singular-detection"],
    },
    "extension-schedule": {
        "model": {**PACK, "ell1_fraction": (FLOAT, 1e-3), "r1": (FLOAT, 10.0), "r_target": (FLOAT, 1.0)},
        "solver": {},
        "checks": {
            "schedule-exact": {},
            "radius-budget": {"sweep": (INT, 200)},
            "shi-horizon": {"K": (FLOATS, [0.5, 1.0, 2.0])},
        },
        "default_checks": ["schedule-exact", "radius-budget", "shi-horizon"],
    },
    "pyramid": {
        "model": {**PACK, "k_max": (INT, 8)},
        "solver": {},
        "checks": {"pyramid-monotone": {"samples": (INT, 41)}},
        "default_checks": ["pyramid-monotone"],
    },
    "gh-report": {
        "model": {"kind": (STR, "cone"), "c": (FLOAT, 0.7), "delta": (FLOAT, 0.1),
                  "radius": (FLOAT, 1.0), "rings": (INT, 12), "eps": (FLOAT, 0.75),
                  "point_radius": (FLOAT, 0.0), "point_angle": (FLOAT, 0.0)},
        "solver": {},
        "checks": {
            "net-covering": {},
            "packing-bound": {},
            "gh-self": {},
            "singular-detection": {"lambdas": (FLOATS, [4.0, 8.0, 16.0]), "expect": (STR, "auto")},
        },
        "default_checks": ["net-covering", "packing-bound", "gh-self", "singular-detection"],
    },
}

SCENARIOS = tuple(SCHEMA)
STUDY_COMMON = {"levels": (INT, 3), "min_order": (FLOAT, 1.8), "max_error": (FLOAT, 1e-3)}


@dataclass
class ScenarioConfig:
    name: str
    model: dict
    solver: dict
    checks: list
    check_params: dict
    study: dict
    seed: int = 0
    out: str | None = None
    source: str = "<memory>"

    def to_dict(self):
        return {"name": self.name, "model": self.model, "solver": self.solver,
                "checks": self.checks, "check_params": self.check_params,
                "study": self.study, "seed": self.seed}


def _convert(kind, text):
    text = text.strip()
    if kind == FLOAT:
        return float(text)
    if kind == INT:
        return int(text)
    if kind == BOOL:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind == FLOATS:
        return [float(v) for v in text.split(",") if v.strip()]
    return text


class _Locator:
    """Maps (section, key) to a line number in the source text."""

    def __init__(self, text, source):
        self.source = source
        self.lines = {}
        section = None
        for no, line in enumerate(text.splitlines(), 1):
            s = line.strip()
            m = re.match(r"\[(.+)\]$", s)
            if m:
                section = m.group(1).strip()
                self.lines[(section, None)] = no
            elif section and s and s[0] not in "#;" and ("=" in s or ":" in s):
                key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
                self.lines.setdefault((section, key), no)

    def __call__(self, section, key=None):
        no = self.lines.get((section, key.lower() if key else None))
        where = f"{self.source}:{no}" if no else self.source
        return f"{where} [{section}]" + (f" {key}" if key else "")


def _fill(schema, given, section, loc):
    out = {k: copy.deepcopy(v[1]) for k, v in schema.items()}
    lower = {k.lower(): k for k in schema}
    for key, text in given.items():
        if key.lower() not in lower:
            raise ConfigError(f"unknown parameter {key!r}", loc(section, key))
        name = lower[key.lower()]
        try:
            out[name] = _convert(schema[name][0], text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {name!r}: {exc}", loc(section, key)) from None
    return out


def parse_config_text(text, source="<memory>") -> ScenarioConfig:
    loc = _Locator(text, source)
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}", source) from None
    if not cp.has_section("scenario"):
        raise ConfigError("missing [scenario] section", source)
    sc = dict(cp["scenario"])
    for key in sc:
        if key not in ("name", "seed", "out"):
            raise ConfigError(f"unknown parameter {key!r}", loc("scenario", key))
    name = sc.get("name", "").strip()
    if name not in SCHEMA:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}",
                          loc("scenario", "name"))
    spec = SCHEMA[name]
    try:
        seed = int(sc.get("seed", "0"))
    except ValueError:
        raise ConfigError("seed must be an integer", loc("scenario", "seed")) from None
    sections = {"model": {}, "solver": {}, "study": {}}
    checks = list(spec["default_checks"])
    check_given = {}
    for sec in cp.sections():
        if sec == "scenario":
            continue
        if sec in sections:
            sections[sec] = dict(cp[sec])
        elif sec == "checks":
            for key in cp[sec]:
                if key != "enabled":
                    raise ConfigError(f"unknown parameter {key!r}", loc(sec, key))
            if "enabled" in cp[sec]:
                checks = [c.strip() for c in cp[sec]["enabled"].split(",") if c.strip()]
                for c in checks:
                    if c not in spec["checks"]:
                        raise ConfigError(f"unknown check {c!r} for scenario {name!r}; "
                                          f"available: {', '.join(spec['checks'])}",
                                          loc(sec, "enabled"))
        elif sec.startswith("check."):
            cname = sec[len("check."):]
            if cname not in spec["checks"]:
                raise ConfigError(f"unknown check {cname!r} for scenario {name!r}", loc(sec))
            check_given[cname] = dict(cp[sec])
        else:
            raise ConfigError(f"unknown section [{sec}]", loc(sec))
    if "study" in spec:
        study_schema = {**STUDY_COMMON, **spec["study"]}
    else:
        study_schema = {}
        if sections["study"]:
            raise ConfigError(f"scenario {name!r} has no refinement study", loc("study"))
    model = _fill(spec["model"], sections["model"], "model", loc)
    solver = _fill(spec["solver"], sections["solver"], "solver", loc)
    study = _fill(study_schema, sections["study"], "study", loc)
    params = {c: _fill(spec["checks"][c], check_given.get(c, {}), f"check.{c}", loc)
              for c in spec["checks"]}
    return ScenarioConfig(name, model, solver, checks, params, study, seed,
                          sc.get("out"), source)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config_text(text, str(path))


def default_config(name, **overrides) -> ScenarioConfig:
    """Config with every default for ``name``; ``overrides`` patch model/solver keys."""
    cfg = parse_config_text(f"[scenario]\nname = {name}\n", f"<default:{name}>")
    for k, v in overrides.items():
        target = cfg.model if k in cfg.model else cfg.solver if k in cfg.solver else None
        if target is None:
            raise ConfigError(f"unknown parameter {k!r}", f"<default:{name}>")
        target[k] = v
    return cfg
