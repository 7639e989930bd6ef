import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hypgraph import cli
from hypgraph import geometry as geo
from hypgraph import io
from hypgraph import solver as sol

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(*argv):
    return cli.main([str(a) for a in argv])


def load(path):
    return json.loads(Path(path).read_text())


def without_timestamp(path):
    return [line for line in Path(path).read_text().splitlines() if '"timestamp"' not in line]


@pytest.fixture(scope="module")
def disk_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("disk")
    assert run("solve", "--domain", CONFIGS / "disk.json", "--h", 1 / 32, "--out", out) == 0
    return out


# --------------------------------------------------------------------------
# solution files
# --------------------------------------------------------------------------


def test_solution_files(disk_dir):
    rows = list(csv.reader(open(disk_dir / io.SOLUTION_CSV)))
    assert rows[0] == ["x", "y", "u", "d_x", "F_residual"]
    meta = load(disk_dir / io.SOLUTION_META)
    assert meta["nodes"] == len(rows) - 1
    assert meta["h"] == 1 / 32 and meta["n"] == 2
    assert meta["tau_schedule"][-1] == meta["tau"]
    assert meta["config"]["h"] == 1 / 32 and "timestamp" in meta
    F = np.array([float(r[4]) for r in rows[1:]])
    assert np.max(np.abs(F)) == pytest.approx(meta["max_abs_F"])


def test_solution_round_trip(disk_dir):
    s = io.read_solution(disk_dir)
    direct = sol.newton_solve(sol.build_grid(geo.disk(), 1 / 32))
    assert np.array_equal(s.u, direct.u)
    assert s.tau == direct.tau and s.n == 2
    assert np.allclose(s.F(), direct.F(), atol=1e-12)


def test_corrupt_solution_rejected(tmp_path, disk_dir):
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / io.SOLUTION_META).write_text((disk_dir / io.SOLUTION_META).read_text())
    lines = (disk_dir / io.SOLUTION_CSV).read_text().splitlines()
    (bad / io.SOLUTION_CSV).write_text("\n".join(lines[:-5]) + "\n")
    with pytest.raises(ValueError):
        io.read_solution(bad)
    assert run("estimate", "--solution", bad, "--out", tmp_path / "est") == 1


def test_dumps_handles_numpy_and_infinity():
    text = io.dumps({"a": np.float64(1.5), "b": np.arange(2), "c": float("inf"), "d": np.bool_(True)})
    assert json.loads(text) == {"a": 1.5, "b": [0, 1], "c": "inf", "d": True}


# --------------------------------------------------------------------------
# exit codes
# --------------------------------------------------------------------------


def test_coarse_grid_exit(tmp_path, capsys):
    assert run("solve", "--domain", CONFIGS / "disk.json", "--h", 0.5, "--out", tmp_path) == 1
    assert "grid too coarse" in capsys.readouterr().err


def test_empty_domain_exit(tmp_path):
    cfg = {
        "n": 2,
        "primitives": [
            {"kind": "disk", "center": [0, 0], "radius": 1},
            {"kind": "disk", "center": [3, 0], "radius": 1},
        ],
        "interior_point": [0.5, 0],
    }
    path = tmp_path / "empty.json"
    path.write_text(json.dumps(cfg))
    assert run("solve", "--domain", path, "--out", tmp_path) == 1


def test_config_errors(tmp_path):
    assert run("solve", "--domain", tmp_path / "missing.json") == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("solve", "--config", bad) == 1
    bad.write_text(json.dumps({"domain": str(CONFIGS / "disk.json"), "colour": "red"}))
    assert run("solve", "--config", bad) == 1
    assert run("verify-barrier", "--family", "zeta", "--out", tmp_path) == 1


def test_solver_failure_exit(tmp_path, monkeypatch):
    def fail(*args, **kwargs):
        raise sol.SolverError("Newton failed at tau=0.1")

    monkeypatch.setattr(sol, "newton_solve", fail)
    assert run("solve", "--domain", CONFIGS / "disk.json", "--h", 1 / 32, "--out", tmp_path) == 2


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"domain": str(CONFIGS / "disk.json"), "h": 1 / 16, "out": str(tmp_path / "a")}))
    assert run("solve", "--config", cfg, "--h", 1 / 24) == 0
    meta = load(tmp_path / "a" / io.SOLUTION_META)
    assert meta["h"] == 1 / 24
    assert meta["config"]["domain"] == str(CONFIGS / "disk.json")


# --------------------------------------------------------------------------
# verify-barrier
# --------------------------------------------------------------------------


def test_verify_s3(tmp_path):
    assert run("verify-barrier", "--family", "s3", "--domain", CONFIGS / "cap_a3.json", "--samples", 20000, "--out", tmp_path) == 0
    rep = load(tmp_path / "certification.json")
    assert rep["pass"] and rep["max_F"] <= 1e-12 and rep["seed"] == 0
    assert rep["params"]["eps"] == pytest.approx(rep["admissible_eps"])


def test_verify_s3_forced_eps_fails(tmp_path):
    # eta = 1 on this cap, so eps = 10 eta
    assert run("verify-barrier", "--family", "s3", "--domain", CONFIGS / "cap_a3.json", "--eps", 10, "--samples", 5000, "--out", tmp_path) == 3
    assert not load(tmp_path / "certification.json")["pass"]


def test_verify_flat_sweep(tmp_path):
    assert run("verify-barrier", "--family", "flat", "--out", tmp_path) == 0
    rep = load(tmp_path / "certification.json")
    assert [r["n"] for r in rep["reports"]] == [2, 3, 4, 5]
    for r in rep["reports"]:
        assert r["max_lhs"] <= -6 * r["n"] ** 2 + 3 * r["n"] + 2 + 1e-9


def test_verify_s4_and_ball(tmp_path):
    assert run("verify-barrier", "--family", "s4", "--domain", CONFIGS / "cap_a1.5.json", "--delta", 0.25, "--samples", 20000, "--out", tmp_path / "s4") == 0
    rep = load(tmp_path / "s4" / "certification.json")
    assert rep["params"]["b"] == pytest.approx(7 / 3) and rep["Phi_at_A"] <= 0
    assert run("verify-barrier", "--family", "ball", "--domain", CONFIGS / "disk.json", "--samples", 5000, "--out", tmp_path / "ball") == 0


def test_verify_family_mismatch(tmp_path, capsys):
    assert run("verify-barrier", "--family", "s3", "--domain", CONFIGS / "disk.json", "--a", 3, "--out", tmp_path) == 1
    assert "mismatch" in capsys.readouterr().err
    assert run("verify-barrier", "--family", "s3", "--domain", CONFIGS / "disk.json", "--out", tmp_path) == 1
    assert run("verify-barrier", "--family", "s3", "--domain", CONFIGS / "cap_a3.json", "--a", 2.5, "--out", tmp_path) == 1
    assert run("verify-barrier", "--family", "ball", "--domain", CONFIGS / "unit_square.json", "--out", tmp_path) == 1


# --------------------------------------------------------------------------
# classify, estimate, validate-ball
# --------------------------------------------------------------------------


def test_classify(tmp_path):
    assert run("classify", "--domain", CONFIGS / "disk.json", "--out", tmp_path / "d") == 0
    rep = load(tmp_path / "d" / "classification.json")
    assert rep["classification"]["a"] == 2
    assert rep["classification"]["eta"] == pytest.approx(0.5, abs=1e-3)
    assert rep["exterior_radius_check"]["pass"]
    assert run("classify", "--domain", CONFIGS / "unit_square.json", "--out", tmp_path / "s") == 0
    rep = load(tmp_path / "s" / "classification.json")
    assert rep["classification"]["a"] == "inf" and rep["classification"]["eta"] is None
    assert run("classify", "--domain", CONFIGS / "ellipse.json", "--out", tmp_path / "e") == 0
    rep = load(tmp_path / "e" / "classification.json")
    assert rep["classification"]["a"] == 2 and rep["classification"]["eta"] > 0


def test_estimate_disk(disk_dir, tmp_path):
    src = tmp_path / "sol"
    assert run("solve", "--domain", CONFIGS / "disk.json", "--h", 1 / 64, "--out", src) == 0
    assert run("estimate", "--solution", src, "--out", tmp_path / "est") == 0
    rep = load(tmp_path / "est" / "estimate.json")
    assert len(rep["anchors"]) == 4
    for a in rep["anchors"]:
        assert a["alpha"] == pytest.approx(0.5, abs=0.05)
        assert (tmp_path / "est" / a["profile_csv"]).exists()


def test_estimate_square_edge(tmp_path):
    src = tmp_path / "sol"
    assert run("solve", "--domain", CONFIGS / "unit_square.json", "--h", 1 / 64, "--out", src) == 0
    assert run("estimate", "--solution", src, "--anchor", "0.5,0", "--out", src) == 0
    rep = load(src / "estimate.json")
    assert rep["anchors"][0]["alpha"] == pytest.approx(1 / 3, abs=0.05)


def test_estimate_violation_exit(disk_dir, tmp_path):
    fake = tmp_path / "fake"
    fake.mkdir()
    (fake / io.SOLUTION_META).write_text((disk_dir / io.SOLUTION_META).read_text())
    with open(disk_dir / io.SOLUTION_CSV) as src, open(fake / io.SOLUTION_CSV, "w", newline="") as dst:
        rows = csv.reader(src)
        w = csv.writer(dst)
        w.writerow(next(rows))
        for x, y, u, d, f in rows:
            w.writerow([x, y, repr(10 * float(d) ** 0.5), d, f])
    assert run("estimate", "--solution", fake, "--out", fake) == 4
    assert not load(fake / "estimate.json")["pass"]


def test_validate_ball_radial(tmp_path):
    assert run("validate-ball", "--R", 2, "--n", 3, "--out", tmp_path) == 0
    rep = load(tmp_path / "validate_ball.json")
    assert "planar" not in rep
    assert rep["radial"]["max_error"] <= 1e-4 * 2
    assert rep["radial"]["identity_residual"] <= 1e-10


# --------------------------------------------------------------------------
# reproducibility
# --------------------------------------------------------------------------


def test_reports_are_deterministic(tmp_path):
    args = ("verify-barrier", "--family", "s3", "--domain", CONFIGS / "cap_a3.json", "--samples", 4000, "--seed", 5, "--out", tmp_path)
    assert run(*args) == 0
    first = without_timestamp(tmp_path / "certification.json")
    assert run(*args) == 0
    assert without_timestamp(tmp_path / "certification.json") == first
    assert load(tmp_path / "certification.json")["config"]["seed"] == 5


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "hypgraph.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for name in ("solve", "verify-barrier", "classify", "estimate", "validate-ball"):
        assert name in out.stdout
