import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pytest

from riccilab.cli import main, run_scenario
from riccilab.config import SCENARIOS, default_config, load_config, parse_config_text
from riccilab.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


# configuration
@pytest.mark.parametrize("text,where", [
    ("[scenario]\nname = spheer\n", ":2 [scenario] name"),
    ("[scenario]\nname = sphere\n\n[model]\nnodez = 5\n", ":5 [model] nodez"),
    ("[scenario]\nname = sphere\n[solver]\ndt = fast\n", ":4 [solver] dt"),
    ("[scenario]\nname = sphere\n[checks]\nenabled = area-law, magic\n", ":4 [checks] enabled"),
    ("[scenario]\nname = sphere\n[check.magic]\nx = 1\n", ":3 [check.magic]"),
    ("[scenario]\nname = pyramid\n[study]\nlevels = 3\n", ":3 [study]"),
    ("[scenario]\nname = sphere\nseed = x\n", ":3 [scenario] seed"),
    ("[model]\nnodes = 3\n", "c.ini"),
])
def test_config_errors_are_located(tmp_path, text, where):
    p = write(tmp_path, text)
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert where in str(exc.value)


def test_config_error_exits_one(tmp_path, capsys):
    p = write(tmp_path, "[scenario]\nname = sphere\n[model]\nbogus = 1\n")
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "config error" in err and f"{p}:4" in err


def test_missing_config_file_exits_one(tmp_path):
    assert main(["run", str(tmp_path / "nope.ini")]) == 1


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_configs_parse(path):
    cfg = load_config(path)
    assert cfg.name in SCENARIOS


def test_default_config_overrides():
    cfg = default_config("sphere", nodes=129, dt=2e-3)
    assert cfg.model["nodes"] == 129 and cfg.solver["dt"] == 2e-3
    with pytest.raises(ConfigError):
        default_config("sphere", nonsense=1)


def test_check_parameters_override_defaults():
    cfg = parse_config_text("[scenario]\nname = sphere\n[check.area-law]\ntolerance = 0.02\n")
    assert cfg.check_params["area-law"]["tolerance"] == 0.02
    assert cfg.check_params["closed-form"]["tolerance"] == 1e-3


# runs
@pytest.fixture(scope="module")
def sphere_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sphere")
    code = main(["run", str(CONFIGS / "sphere.ini"), "--out", str(out), "--quiet"])
    return code, out


def test_sphere_run_exits_zero(sphere_run):
    code, out = sphere_run
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["pass"] and summary["status"] == "ok"
    assert set(summary["checks"]) == {"area-law", "closed-form", "curvature-decay",
                                      "metric-equivalence", "bishop-gromov"}


def test_sphere_csv_slope_is_gauss_bonnet(sphere_run):
    _, out = sphere_run
    s = read_csv(out / "trajectory.csv")
    slope = np.diff(s["total_area"]) / np.diff(s["t"])
    np.testing.assert_allclose(slope, -8 * math.pi, rtol=0.01)


def test_run_manifest_digests(sphere_run):
    _, out = sphere_run
    run = json.loads((out / "run.json").read_text())
    assert run["config"]["name"] == "sphere"
    for name, digest in run["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    manifest = (out / "MANIFEST").read_text()
    for name in run["files"]:
        if name.endswith(".csv"):
            assert name in manifest
    for rep in (out / "reports").glob("*.json"):
        data = json.loads(rep.read_text())
        assert {"check", "pass", "margin", "tolerance", "constants", "witnesses"} <= set(data)


def test_report_renders_figures(sphere_run, capsys):
    code, out = sphere_run
    assert main(["report", str(out)]) == 0
    figs = sorted((out / "figures").glob("*.png"))
    assert figs
    for f in figs:
        assert f.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert "figure figures/" in capsys.readouterr().out


def test_report_on_non_run_directory(tmp_path):
    assert main(["report", str(tmp_path)]) == 1


def test_flat_static_margins_are_zero(tmp_path):
    code, summary = run_scenario(load_config(CONFIGS / "flat-disc-static.ini"), tmp_path)
    assert code == 0
    assert abs(summary["checks"]["static"]["margin"] - 1e-12) <= 1e-12


def test_negative_control_exits_nonzero(tmp_path):
    code = main(["run", str(CONFIGS / "thin-cylinder-negative.ini"), "--out", str(tmp_path), "--quiet"])
    assert code == 1
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert not summary["checks"]["extinction"]["pass"]


def test_solver_failure_exits_two_with_partial_artifacts(tmp_path):
    p = write(tmp_path, "[scenario]\nname = sphere\n[model]\nnodes = 129\n"
                        "[solver]\ndt = 0.01\nnewton_tol = 1e-300\nmax_newton = 1\n")
    code = main(["run", str(p), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 2
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["status"] == "solver-failure" and not summary["pass"]
    assert (tmp_path / "o" / "trajectory.csv").is_file()


def test_study_reports_order(tmp_path):
    code = main(["study", str(CONFIGS / "sphere.ini"), "--out", str(tmp_path), "--quiet"])
    assert code == 0
    s = read_csv(tmp_path / "study.csv")
    assert len(s["h"]) == 3
    assert np.all(np.diff(s["error"]) < 0)


def test_runs_are_byte_identical(tmp_path):
    cfg = CONFIGS / "hyperbolic.ini"
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(a), "--quiet"]) == 0
    assert main(["run", str(cfg), "--out", str(b), "--quiet"]) == 0
    fa = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    fb = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert fa == fb
    for f in fa:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_seed_override_changes_sampled_pairs(tmp_path):
    cfg = CONFIGS / "hyperbolic.ini"
    main(["run", str(cfg), "--out", str(tmp_path / "a"), "--quiet"])
    main(["run", str(cfg), "--out", str(tmp_path / "b"), "--quiet", "--seed", "5"])
    ra = json.loads((tmp_path / "a" / "reports" / "distance-sandwich.json").read_text())
    rb = json.loads((tmp_path / "b" / "reports" / "distance-sandwich.json").read_text())
    assert ra["witnesses"]["pairs"] != rb["witnesses"]["pairs"]
