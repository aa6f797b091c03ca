"""CSV/JSON serialization with atomic, deterministic writes."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .surface.grid import ConformalGrid
from .surface.metric import FiniteMetricSpace
from .surface.radial import RadialProfile

SERIES_COLUMNS = ("t", "total_area", "min_K", "max_K", "min_u", "max_u")


def atomic_write(path, data: str | bytes):
    """Write to a temporary sibling then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "", "encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x):
    """Shortest round-trip text for a float; NaN/inf as literal names."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write(path, csv_text(header, rows))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def json_text(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    atomic_write(path, json_text(obj))


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


# grids and profiles
def grid_rows(grid: ConformalGrid):
    X, Y = grid.coords()
    dom = grid.domain
    for i in range(grid.width):
        for j in range(grid.height):
            if dom[i, j]:
                yield (i, j, X[i, j], Y[i, j], grid.u[i, j], int(grid.boundary_mask[i, j]))


GRID_HEADER = ("i", "j", "x", "y", "u", "boundary")


def write_grid_csv(path, grid: ConformalGrid):
    """Node list with chart coordinates and u; the first line of data fixes h and origin."""
    write_csv(path, GRID_HEADER, grid_rows(grid))


def read_grid_csv(path, chart_kind="plane"):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != GRID_HEADER:
            raise InvalidInput(f"{path}: not a grid CSV")
        rows = [tuple(map(float, row)) for row in r]
    if not rows:
        raise InvalidInput(f"{path}: no nodes")
    a = np.array(rows)
    I, J = a[:, 0].astype(int), a[:, 1].astype(int)
    nx, ny = I.max() + 1, J.max() + 1
    u = np.full((nx, ny), np.nan)
    u[I, J] = a[:, 4]
    dom = np.zeros((nx, ny), bool)
    dom[I, J] = True
    k = np.flatnonzero((I != I[0]) | (J != J[0]))
    if k.size:
        k = k[0]
        di, dj = I[k] - I[0], J[k] - J[0]
        h = float(np.hypot(a[k, 2] - a[0, 2], a[k, 3] - a[0, 3]) / np.hypot(di, dj))
    else:
        h = 1.0
    origin = (a[0, 2] - I[0] * h, a[0, 3] - J[0] * h)
    return ConformalGrid(u, h, origin, chart_kind, dom)


def write_profile_csv(path, prof: RadialProfile):
    K = prof.curvature()
    write_csv(path, ("r", "u", "K"), zip(prof.r, prof.u, K))


# finite metric spaces
def fms_text(fms: FiniteMetricSpace):
    lines = [f"n,basepoint\n{fms.n},{fms.basepoint}\n"]
    d = fms.d
    for row in d:
        lines.append(",".join(fmt(v) for v in row) + "\n")
    return "".join(lines)


def write_fms_csv(path, fms: FiniteMetricSpace):
    """Header ``n,basepoint``, one data line, then the row-major distance matrix."""
    atomic_write(path, fms_text(fms))


def read_fms_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "n,basepoint":
        raise InvalidInput(f"{path}: missing n,basepoint header")
    n, bp = (int(v) for v in lines[1].split(","))
    d = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    if d.shape != (n, n):
        raise InvalidInput(f"{path}: expected a {n}x{n} matrix")
    return FiniteMetricSpace(d, bp)


def trajectory_rows(traj):
    s = traj.series
    return zip(*(s[c] for c in SERIES_COLUMNS))


def write_trajectory_csv(path, traj):
    write_csv(path, SERIES_COLUMNS, trajectory_rows(traj))
