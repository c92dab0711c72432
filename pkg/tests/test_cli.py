"""CLI surface: determinism, exit codes, and command behavior."""

import hashlib
import io
import json
import os

import pytest

from qmlab.cli import run

SCENE = {
    "seed": 7,
    "space": {"mode": "compact", "width": 8, "height": 8},
    "regions": {
        "block": {"role": "compact", "rect": [1, 1, 3, 3]},
        "dot": {"role": "compact", "cells": [[2, 2]]},
    },
    "measures": {
        "delta": {"kind": "point_mass", "cell": [2, 2]},
        "three": {"kind": "points_2n1",
                  "points": [[1, 1], [5, 1], [3, 5]]},
        "circle": {"kind": "aarnes_circle", "p": [3, 3]},
        "count": {"kind": "cell_count"},
        "blob": {"kind": "diffuse_dtm", "region": "block"},
    },
    "functions": {
        "bump": {"kind": "radial", "center": [2.0, 2.0], "radius": 4.0},
        "xs": {"kind": "coordinate_x"},
        "ind": {"kind": "indicator", "region": "block"},
    },
    "transforms": {
        "rot": {"kind": "inverse_map", "isometry": 1},
        "hull": {"kind": "two_point_hull", "x": [1, 1], "z": [5, 5]},
        "const": {"kind": "constant_simple", "measure": "circle"},
        "both": {"kind": "compose", "outer": "rot", "inner": "hull"},
    },
    "systems": {
        "sier": {"kind": "sierpinski"},
        "gridsys": {"kind": "grid", "transforms": ["rot", "const"],
                    "alphas": [0.5, 0.5]},
    },
    "families": {
        "consts": {"kind": "1d", "interval": [0.0, 1.0, 10],
                   "weights": [1], "values": [[0.15], [0.55], [0.95]]},
        "evens": {"kind": "1d", "interval": [0.0, 1.0, 10],
                  "csv": "1,0.15,0.35,0.55,0.95\n2,0.2,0.3,0.6,0.8"},
    },
    "clouds": {
        "a": {"points": [[0.0, 0.0], [1.0, 0.0]]},
        "b": {"points": [[0.0, 1.0], [1.0, 1.0]]},
    },
}


@pytest.fixture
def scene_path(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(SCENE))
    return str(path)


def invoke(argv):
    buf = io.StringIO()
    code = run(argv, stdout=buf)
    return code, buf.getvalue()


def test_integrate_delta_is_evaluation(scene_path):
    code, out = invoke(["--scene", scene_path, "integrate",
                        "--measure", "delta", "--function", "bump"])
    assert code == 0
    value = float(out.strip().splitlines()[-1].split(",")[-1])
    assert value == pytest.approx(1.0)  # bump peaks at the mass point


def test_eval_regions(scene_path):
    code, out = invoke(["--scene", scene_path, "eval", "--measure", "three",
                        "--region", "block", "--region", "dot"])
    assert code == 0
    rows = [l.split(",") for l in out.strip().splitlines()[1:]]
    assert rows[0][2] == "0"  # block holds one config point
    assert rows[1][2] == "0"


def test_axioms_pass_and_fail(scene_path):
    code, out = invoke(["--scene", scene_path, "--budget", "60",
                        "axioms", "--target", "circle"])
    assert code == 0 and "fail" not in out
    code, out = invoke(["--scene", scene_path, "--budget", "60",
                        "axioms", "--target", "rot"])
    assert code == 0
    # the diffuse blob is deficient: subadditivity row may fail, axioms pass
    code, out = invoke(["--scene", scene_path, "--budget", "60",
                        "axioms", "--target", "blob"])
    assert code == 0


def test_unknown_name_is_exit_2(scene_path):
    code, out = invoke(["--scene", scene_path, "eval", "--measure", "nope",
                        "--region", "block"])
    assert code == 2 and "reference" in out
    code, _ = invoke(["--scene", scene_path, "axioms", "--target", "nope"])
    assert code == 2


def test_kr_exact(scene_path):
    code, out = invoke(["--scene", scene_path, "kr",
                        "--cloud", "a", "--cloud", "b"])
    assert code == 0
    row = out.strip().splitlines()[1].split(",")
    assert float(row[1]) == pytest.approx(1.0, abs=1e-9)
    assert float(row[3]) <= 1e-9


def test_markov_sierpinski_trace(scene_path):
    code, out = invoke(["--scene", scene_path, "markov", "--system", "sier",
                        "--steps", "12", "--tol", "1e-12"])
    assert code == 0
    rows = [l.split(",") for l in out.strip().splitlines()
            if l.startswith("trace,")]
    assert len(rows) == 12
    ds = [float(r[2]) for r in rows]
    for a, b in zip(ds, ds[1:]):
        assert b <= 0.5 * a + 1e-9
    summary = [l for l in out.strip().splitlines() if l.startswith("summary")][0]
    assert float(summary.split(",")[3]) <= 0.5 + 1e-9


def test_markov_grid_converges(scene_path):
    code, out = invoke(["--scene", scene_path, "--budget", "10",
                        "markov", "--system", "gridsys",
                        "--initial", "count", "--steps", "6",
                        "--tol", "1e-6"])
    assert code == 0
    assert "converged" in out


def test_median_constants(scene_path):
    code, out = invoke(["--scene", scene_path, "median", "--family", "consts"])
    assert code == 0
    rows = [l.split(",") for l in out.strip().splitlines()[1:]]
    masses = {int(c): float(m) for c, m in rows}
    assert masses[5] == 1.0  # cell holding 0.55
    assert sum(masses.values()) == 1.0
    code, out = invoke(["--scene", scene_path, "median", "--family", "evens"])
    assert code == 0


def test_render_ppm_and_mass(scene_path, tmp_path):
    out_path = str(tmp_path / "sier.ppm")
    code, out = invoke(["--scene", scene_path, "--out", out_path,
                        "render", "--system", "sier",
                        "--samples", "20000", "--resolution", "64"])
    assert code == 0
    data = open(out_path, "rb").read()
    assert data.startswith(b"P6\n64 64\n255\n")
    assert len(data) == 13 + 64 * 64 * 3
    binned = float(out.strip().splitlines()[-1].split(",")[-1])
    assert binned == pytest.approx(20000, rel=1e-12)


def test_render_unwritable_is_exit_3(scene_path):
    code, out = invoke(["--scene", scene_path, "--out",
                        "/no/such/dir/x.ppm", "render", "--system", "sier",
                        "--samples", "1000", "--resolution", "16"])
    assert code == 3


def test_missing_scene_is_exit_3():
    code, out = invoke(["--scene", "/no/such/scene.json", "eval",
                        "--measure", "x", "--region", "y"])
    assert code == 3


def test_determinism_across_runs(scene_path, tmp_path):
    cases = [
        ["--scene", scene_path, "integrate", "--measure", "three",
         "--function", "bump"],
        ["--scene", scene_path, "--budget", "40", "axioms",
         "--target", "three"],
        ["--scene", scene_path, "kr", "--cloud", "a", "--cloud", "b"],
        ["--scene", scene_path, "markov", "--system", "sier", "--steps", "8",
         "--tol", "1e-12"],
        ["--scene", scene_path, "median", "--family", "evens"],
        ["--scene", scene_path, "--budget", "6", "kr", "--measure", "three",
         "--measure", "count", "--restarts", "4", "--iters", "6"],
    ]
    for argv in cases:
        outputs = {invoke(argv)[1] for _ in range(3)}
        assert len(outputs) == 1, argv


def test_report_files_and_figures(scene_path, tmp_path):
    out_dir = str(tmp_path / "report")
    argv = ["--scene", scene_path, "--out", out_dir, "markov",
            "--system", "sier", "--steps", "6", "--tol", "1e-12"]
    code, out = invoke(argv)
    assert code == 0
    csv_path = os.path.join(out_dir, "markov.csv")
    fig_path = os.path.join(out_dir, "markov.png")
    assert os.path.exists(csv_path) and os.path.exists(fig_path)
    assert open(csv_path).read() == out
    # figure bytes are deterministic too
    h1 = hashlib.sha256(open(fig_path, "rb").read()).hexdigest()
    invoke(argv)
    h2 = hashlib.sha256(open(fig_path, "rb").read()).hexdigest()
    assert h1 == h2


def test_render_byte_identical(scene_path, tmp_path):
    hashes = set()
    for i in range(2):
        out_path = str(tmp_path / f"r{i}.ppm")
        code, _ = invoke(["--scene", scene_path, "--out", out_path,
                          "render", "--system", "sier",
                          "--samples", "5000", "--resolution", "32"])
        assert code == 0
        hashes.add(hashlib.sha256(open(out_path, "rb").read()).hexdigest())
    assert len(hashes) == 1


def test_seed_override_changes_output(scene_path):
    a = invoke(["--scene", scene_path, "--seed", "1", "render",
                "--system", "sier", "--samples", "50", "--resolution", "16",
                "--out", "/tmp/qmlab_seed_a.ppm"])
    b = invoke(["--scene", scene_path, "--seed", "2", "render",
                "--system", "sier", "--samples", "50", "--resolution", "16",
                "--out", "/tmp/qmlab_seed_b.ppm"])
    assert a[0] == 0 and b[0] == 0
    assert open("/tmp/qmlab_seed_a.ppm", "rb").read() != \
        open("/tmp/qmlab_seed_b.ppm", "rb").read()
