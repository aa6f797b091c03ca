"""Command line: ``riccilab run|study|report``.

Exit codes: 0 when every requested check passes, 1 for failed checks or a
bad config, 2 when the solver fails (partial artifacts are kept).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ScenarioConfig, load_config
from .errors import ConfigError, RiccilabError, SolverFailure
from .scenarios import RUNNERS, Outcome, Writer, convergence_study, finalize

EXIT_OK, EXIT_FAIL, EXIT_SOLVER = 0, 1, 2

log = logging.getLogger("riccilab")


def _out_dir(cfg: ScenarioConfig, override, kind):
    if override:
        return Path(override)
    if cfg.out:
        base = Path(cfg.out)
        return base if base.is_absolute() else Path(cfg.source).parent / base
    return Path("runs") / (cfg.name if kind == "run" else f"{cfg.name}-study")


def run_scenario(cfg: ScenarioConfig, out) -> tuple[int, dict]:
    """Run one scenario into ``out``; returns (exit status, summary)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    outcome = Outcome()
    w = Writer(out, outcome)
    rng = np.random.default_rng(cfg.seed)
    code = EXIT_OK
    try:
        RUNNERS[cfg.name](cfg, w, rng)
    except SolverFailure as exc:
        outcome.status, outcome.message = "solver-failure", str(exc)
        if exc.trajectory is not None:
            w.trajectory(exc.trajectory)
        code = EXIT_SOLVER
    summary = finalize(cfg, out, outcome)
    if code == EXIT_OK and not outcome.passed:
        code = EXIT_FAIL
    return code, summary


def run_study(cfg: ScenarioConfig, levels, out) -> tuple[int, dict]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    outcome = Outcome()
    w = Writer(out, outcome)
    code = EXIT_OK
    try:
        convergence_study(cfg, levels, w)
    except SolverFailure as exc:
        outcome.status, outcome.message = "solver-failure", str(exc)
        code = EXIT_SOLVER
    summary = finalize(cfg, out, outcome, kind="study")
    if code == EXIT_OK and not outcome.passed:
        code = EXIT_FAIL
    return code, summary


def report(out) -> tuple[int, dict]:
    """Render figures for a finished run directory and return its summary."""
    from .plotting import render_directory

    out = Path(out)
    path = out / "summary.json"
    if not path.is_file():
        raise ConfigError("no summary.json; not a run directory", str(out))
    summary = io.read_json(path)
    figs = render_directory(out)
    summary["figures"] = [str(p.relative_to(out)) for p in figs]
    code = EXIT_OK if summary.get("pass") else (EXIT_SOLVER if summary.get("status") == "solver-failure"
                                                else EXIT_FAIL)
    return code, summary


def _print_summary(summary, stream=None):
    stream = stream or sys.stdout
    print(f"{summary['scenario']} ({summary['kind']}): {'PASS' if summary['pass'] else 'FAIL'}"
          + (f" [{summary['status']}: {summary['message']}]" if summary["status"] != "ok" else ""),
          file=stream)
    for name, c in summary["checks"].items():
        print(f"  {'pass' if c['pass'] else 'FAIL'}  {name:24s} margin={c['margin']}", file=stream)
    for f in summary.get("figures", []):
        print(f"  figure {f}", file=stream)


def build_parser():
    p = argparse.ArgumentParser(prog="riccilab", description="2D Ricci flow and metric-geometry scenarios")
    sub = p.add_subparsers(dest="verb", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    r = sub.add_parser("run", parents=[common], help="run a scenario config")
    r.add_argument("config")
    s = sub.add_parser("study", parents=[common], help="refinement study against closed forms")
    s.add_argument("config")
    s.add_argument("--levels", type=int, default=None)
    rep = sub.add_parser("report", parents=[common], help="render figures for a run directory")
    rep.add_argument("dir")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "report":
            code, summary = report(args.out or args.dir)
        else:
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            out = _out_dir(cfg, args.out, args.verb)
            if args.verb == "run":
                code, summary = run_scenario(cfg, out)
            else:
                levels = args.levels if args.levels is not None else cfg.study.get("levels", 3)
                code, summary = run_study(cfg, levels, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except RiccilabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if not args.quiet:
        _print_summary(summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
