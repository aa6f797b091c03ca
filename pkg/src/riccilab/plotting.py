"""Static figures for a run directory, rendered from its CSV artifacts."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import atomic_write  # noqa: E402

PNG_META = {"Software": None}


def read_table(path):
    """CSV with a header row -> dict of columns (floats where possible)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return {}
    cols = {h: [] for h in rows[0]}
    for row in rows[1:]:
        for h, v in zip(rows[0], row):
            cols[h].append(v)
    out = {}
    for h, vals in cols.items():
        try:
            out[h] = np.array([float(v) for v in vals])
        except ValueError:
            out[h] = np.array(vals)
    return out


def _save(fig, path):
    import io as _io

    buf = _io.BytesIO()
    fig.savefig(buf, format="png", dpi=100, metadata=PNG_META)
    plt.close(fig)
    atomic_write(path, buf.getvalue())
    return path


def plot_trajectory(tab, path):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    a1.plot(tab["t"], tab["total_area"], "k-")
    a1.set_xlabel("t")
    a1.set_ylabel("area")
    a2.plot(tab["t"], tab["min_K"], label="min K")
    a2.plot(tab["t"], tab["max_K"], label="max K")
    a2.set_yscale("symlog", linthresh=1.0)
    a2.set_xlabel("t")
    a2.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_profile(tabs, path):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    for label, tab in tabs.items():
        a1.semilogx(tab["r"], tab["u"], label=label)
        a2.semilogx(tab["r"], tab["K"], label=label)
    a1.set_xlabel("r")
    a1.set_ylabel("u")
    a2.set_xlabel("r")
    a2.set_ylabel("K")
    a2.set_yscale("symlog", linthresh=1.0)
    a1.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_study(tab, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(tab["h"], tab["error"], "o-", label="error")
    h = tab["h"]
    ref = tab["error"][0] * (h / h[0]) ** 2
    if np.all(tab["error"] > 0):
        ax.loglog(h, ref, "k--", label="slope 2")
    ax.set_xlabel("h")
    ax.set_ylabel("max error")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_xy(tab, x, ys, path, logx=False, logy=False, xlabel=None, ylabel=None):
    fig, ax = plt.subplots(figsize=(5, 4))
    for y in ys:
        ax.plot(tab[x], tab[y], "o-", label=y)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel or x)
    ax.set_ylabel(ylabel or ", ".join(ys))
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_pyramid(tab, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    k, T = tab["k"], tab["T"]
    ax.step(np.concatenate([[0], k]), np.concatenate([[T[0]], T]), where="pre")
    ax.fill_between(np.concatenate([[0], k]), np.concatenate([[T[0]], T]), step="pre", alpha=0.3)
    ax.set_xlabel("distance from basepoint")
    ax.set_ylabel("T_k")
    fig.tight_layout()
    return _save(fig, path)


def render_directory(out):
    """Render every figure the directory's artifacts support; returns written paths."""
    out = Path(out)
    figs = out / "figures"
    written = []

    def have(name):
        return (out / name).is_file()

    if have("trajectory.csv"):
        written.append(plot_trajectory(read_table(out / "trajectory.csv"), figs / "trajectory.png"))
    if have("profile_initial.csv") and have("profile_final.csv"):
        written.append(plot_profile({"initial": read_table(out / "profile_initial.csv"),
                                     "final": read_table(out / "profile_final.csv")},
                                    figs / "profile.png"))
    if have("study.csv"):
        written.append(plot_study(read_table(out / "study.csv"), figs / "study.png"))
    if have("gh.csv"):
        written.append(plot_xy(read_table(out / "gh.csv"), "delta", ["eps_star"], figs / "gh.png",
                               logx=True, logy=True))
    if have("schedule.csv"):
        written.append(plot_xy(read_table(out / "schedule.csv"), "k", ["r"], figs / "schedule.png"))
    if have("radius_sweep.csv"):
        written.append(plot_xy(read_table(out / "radius_sweep.csv"), "ell1", ["loss", "budget"],
                               figs / "radius_sweep.png", logx=True))
    if have("pyramid.csv"):
        written.append(plot_pyramid(read_table(out / "pyramid.csv"), figs / "pyramid.png"))
    if have("inner_curvature.csv"):
        written.append(plot_xy(read_table(out / "inner_curvature.csv"), "t", ["two_t_K"],
                               figs / "inner_curvature.png", logx=True))
    if have("collar.csv"):
        written.append(plot_xy(read_table(out / "collar.csv"), "h", ["length"], figs / "collar.png",
                               logx=True))
    return written
