import csv
import json
import math
import subprocess
import sys

import pytest

from spectropt.cli import main


def _run(tmp_path, command, cfg, *extra, name="out"):
    cfg_path = tmp_path / f"{name}.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / name
    return main([command, "--config", str(cfg_path), "--out", str(out), *extra]), out


def _report(out):
    return json.loads((out / "report.json").read_text())


def _error_line(capsys):
    lines = [ln for ln in capsys.readouterr().err.splitlines() if ln.startswith("{")]
    return json.loads(lines[-1])


DISK_EIGS = {"grid": {"d": 2, "L": 1.2, "n": 63}, "potential": {"kind": "disk", "params": {"R": 1.0}}}


def test_eigs_disk(tmp_path):
    code, out = _run(tmp_path, "eigs", DISK_EIGS)
    assert code == 0
    assert abs(_report(out)["lambda_k"] - 5.783) <= 0.01
    for name in ("config.resolved.json", "metadata.json", "eigenvalues.csv", "eigenfunction_1.csv", "eigenvalues.svg"):
        assert (out / name).is_file()
    resolved = json.loads((out / "config.resolved.json").read_text())
    assert resolved["solver"]["tol"] == 1e-10


def test_torsion_interval(tmp_path):
    cfg = {"grid": {"d": 1, "L": 1.0, "n": 255}, "potential": {"kind": "free"}}
    code, out = _run(tmp_path, "torsion", cfg)
    assert code == 0 and abs(_report(out)["P"] - 1 / 3) <= 1e-3
    with (out / "torsion.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 255


def test_gamma_reports_resolvent(tmp_path):
    cfg = {
        "grid": {"d": 2, "L": 1.2, "n": 31},
        "potential": {"kind": "disk", "params": {"R": 1.0}},
        "other": {"kind": "disk", "params": {"R": 0.6}},
    }
    code, out = _run(tmp_path, "gamma", cfg)
    rep = _report(out)
    assert code == 0 and rep["ordered"] and rep["gamma_distance"] > 0 and "resolvent_distance" in rep


@pytest.mark.parametrize(
    "problem,grid",
    [
        ({"kind": "potential-mass", "k": 1, "p": 0.5}, {"d": 1, "L": 6.0, "n": 127}),
        ({"kind": "potential-mass", "k": 2, "p": 0.5}, {"d": 1, "L": 6.0, "n": 127}),
        ({"kind": "spectral-torsion", "m": 1.0}, {"d": 2, "L": 3.0, "n": 31}),
    ],
)
def test_optimize_kinds(tmp_path, problem, grid):
    cfg = {"grid": grid, "problem": problem, "solver": {"max_iters": 2000}}
    code, out = _run(tmp_path, "optimize", cfg)
    assert code == 0
    rep = _report(out)
    assert rep["audit"]["passed"]
    assert rep["support_radius"] < 0.9 * grid["L"]
    assert abs(rep["t_star"] - 1) <= 0.05
    for name in ("final_potential.json", "trace.csv", "final_potential.svg", "trace.svg"):
        assert (out / name).is_file()


def test_report_deterministic(tmp_path):
    _, a = _run(tmp_path, "eigs", DISK_EIGS, name="a")
    _, b = _run(tmp_path, "eigs", DISK_EIGS, name="b")
    for name in ("report.json", "config.resolved.json", "eigenvalues.csv", "eigenvalues.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.parametrize(
    "cfg",
    [
        {"grid": {"d": 1, "L": 1.0, "n": 2}, "potential": {"kind": "free"}},
        {"grid": {"d": 1, "L": 1.0, "n": 15}, "potential": {"kind": "free"}, "typo": 1},
        {"grid": {"d": 3, "L": 1.0, "n": 15}, "potential": {"kind": "free"}},
        {"grid": {"d": 1, "L": 1.0, "n": 15}, "potential": {"kind": "no-such-shape"}},
    ],
)
def test_bad_config_writes_nothing(tmp_path, capsys, cfg):
    code, out = _run(tmp_path, "torsion", cfg)
    assert code == 2 and not out.exists()
    assert _error_line(capsys)["error"] == "config"


def test_invalid_penalty_exponent(tmp_path, capsys):
    cfg = {"grid": {"d": 1, "L": 6.0, "n": 31}, "problem": {"kind": "potential-mass", "k": 2, "p": 1.5}}
    code, out = _run(tmp_path, "optimize", cfg)
    assert code == 2 and not out.exists()


def test_missing_files(tmp_path, capsys):
    assert main(["torsion", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2
    assert _error_line(capsys)["error"] == "missing-file"
    cfg = {"grid": {"d": 1, "L": 1.0, "n": 15}, "potential": {"path": str(tmp_path / "nope.json")}}
    code, _ = _run(tmp_path, "torsion", cfg)
    assert code == 2 and _error_line(capsys)["error"] == "missing-file"


def test_potential_from_file(tmp_path):
    _, out = _run(tmp_path, "optimize", {"grid": {"d": 1, "L": 6.0, "n": 63},
                                         "problem": {"kind": "potential-mass"}}, name="opt")
    cfg = {"grid": {"d": 1, "L": 6.0, "n": 63}, "potential": {"path": str(out / "final_potential.json")}}
    code, out2 = _run(tmp_path, "eigs", cfg, name="eig")
    assert code == 0
    assert math.isclose(_report(out2)["lambda_k"], _report(out)["lambda_k"], rel_tol=1e-8)


def test_sweep_single_point_matches_run(tmp_path):
    code, single = _run(tmp_path, "eigs", DISK_EIGS, name="single")
    sweep = {"command": "eigs", "base": DISK_EIGS, "axes": {"grid.n": [63]}}
    code2, out = _run(tmp_path, "sweep", sweep, name="sweep")
    assert code == code2 == 0
    assert (out / "point_000" / "report.json").read_bytes() == (single / "report.json").read_bytes()


def test_sweep_ranks_disk_first(tmp_path):
    base = {"grid": {"d": 2, "L": 1.5, "n": 47}, "potential": {"kind": "disk"}}
    shapes = [{"kind": "square", "params": {"a": 0.9}}, {"kind": "disk", "params": {"R": 1.0}},
              {"kind": "rectangle", "params": {"a": 1.2, "b": 0.6}}]
    sweep = {"command": "eigs", "base": base, "rank_by": "merit_torsion", "axes": {"potential": shapes}}
    code, out = _run(tmp_path, "sweep", sweep, "--jobs", "2")
    assert code == 0
    with (out / "leaderboard.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert json.loads(rows[0]["values"])["potential"]["kind"] == "disk"
    scores = [float(r["merit_torsion"]) for r in rows]
    assert scores == sorted(scores)


def test_sweep_m_support_shrinks(tmp_path):
    base = {"grid": {"d": 2, "L": 3.0, "n": 31}, "problem": {"kind": "spectral-torsion", "audit": False},
            "solver": {"max_iters": 2000}}
    sweep = {"command": "optimize", "base": base, "rank_by": "support_radius",
             "axes": {"problem.m": [0.5, 1.0, 2.0]}}
    code, out = _run(tmp_path, "sweep", sweep)
    assert code == 0
    radii = [p["support_radius"] for p in _report(out)["points"]]
    assert radii[0] > radii[1] > radii[2]


def test_sweep_failed_point(tmp_path, capsys):
    base = {"grid": {"d": 1, "L": 1.0, "n": 15}, "potential": {"kind": "free"}}
    sweep = {"command": "torsion", "base": base, "axes": {"potential.kind": ["free", "no-such-shape"]}}
    code, out = _run(tmp_path, "sweep", sweep)
    assert code == 1
    assert _error_line(capsys)["error"] == "sweep-point-failed"
    with (out / "leaderboard.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [r["status"] for r in rows] == ["ok", "failed"]


def test_verify_filter(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--out", str(out), "--filter", "scaling"]) == 0
    names = sorted(p.stem for p in (out / "checks").glob("*.json"))
    assert names == ["scaling_eigenvalues", "scaling_mass", "scaling_torsion"]
    assert main(["verify", "--out", str(tmp_path / "w"), "--filter", "bogus"]) == 2


def test_verify_negative_control(tmp_path, capsys):
    cfg = {"checks": {"filter": ["oracles"], "oracles": {"disk_lambda1": 6.5}}}
    code, out = _run(tmp_path, "verify", cfg)
    assert code == 1
    err = _error_line(capsys)
    assert err["error"] == "verify-failed" and "oracle_disk" in err["message"]


def test_bad_log_level(tmp_path, monkeypatch):
    monkeypatch.setenv("SPECTROPT_LOG", "loud")
    code, _ = _run(tmp_path, "eigs", DISK_EIGS)
    assert code == 2


def test_console_script(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid": {"d": 1, "L": 1.0, "n": 31}, "potential": {"kind": "free"}}))
    proc = subprocess.run([sys.executable, "-m", "spectropt.cli", "torsion", "--config", str(cfg),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
