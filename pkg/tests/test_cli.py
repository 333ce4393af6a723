import json
import subprocess
import sys

import numpy as np
import pytest

from besovlift import bsvg
from besovlift.besov import diff_seminorm, haar_average_norm
from besovlift.cli import main
from besovlift.counterexamples import vortex
from besovlift.grid import BesovParams, Domain, GridFunction, make_grid
from besovlift.lifting import lift_dyadic


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, f):
    path = tmp_path / name
    bsvg.write(path, f)
    return str(path)


def test_norm_constant(tmp_path, capsys):
    g = make_grid(2, 4)
    path = write(tmp_path, "c.bsvg", GridFunction(g, np.full(g.shape, -1.75)))
    code, out, _ = run(capsys, "norm", "--in", path, "--method", "haar-avg", "--s", "0.3", "--p", "2", "--q", "2")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] == 1 and doc["command"] == "norm"
    assert doc["reports"][0]["total"] == 1.75


def test_norm_csv_and_q_inf(tmp_path, capsys):
    g = make_grid(1, 3)
    path = write(tmp_path, "f.bsvg", GridFunction(g, np.arange(8.0)))
    code, out, _ = run(capsys, "norm", "--in", path, "--s", "0.3", "--p", "2", "--q", "inf", "--format", "csv", "--seed", "7")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "# seed=7" and lines[1] == "j,term,method,s,p,q"
    assert all(line.endswith(",inf") for line in lines[2:])
    assert {line.split(",")[2] for line in lines[2:]} == {"diff", "haar-avg", "haar-coeff"}


def test_gen_then_norm_matches_memory(tmp_path, capsys):
    path = str(tmp_path / "v.bsvg")
    code, _, _ = run(capsys, "gen", "vortex", "--level", "6", "--out", path)
    assert code == 0
    code, out, _ = run(capsys, "norm", "--in", path, "--method", "diff", "--s", "0.4", "--p", "2", "--order", "1", "--delta", "0.5")
    got = json.loads(out)["reports"][0]["total"]
    u = vortex(make_grid(2, 6, Domain.CUBE))
    assert got == diff_seminorm(u, BesovParams.of(0.4, 2, 2), 1, 0.5).total


def test_gen_then_lift_matches_memory(tmp_path, capsys):
    src = str(tmp_path / "v.bsvg")
    dst = str(tmp_path / "phi.bsvg")
    run(capsys, "gen", "vortex", "--level", "5", "--domain", "torus", "--out", src)
    code, out, _ = run(capsys, "lift", "--in", src, "--out", dst)
    assert code == 0
    mem = lift_dyadic(vortex(make_grid(2, 5, Domain.TORUS)))
    assert np.array_equal(bsvg.read(dst).values, mem.phase.values)
    assert json.loads(out)["lift"]["residual"] == mem.residual


def test_step_generation_deterministic(tmp_path, capsys):
    paths = []
    for k in range(2):
        p = str(tmp_path / f"s{k}.bsvg")
        run(capsys, "gen", "step", "--dim", "1", "--level", "8", "--seed", "11", "--out", p)
        paths.append(p)
    a, b = (open(p, "rb").read() for p in paths)
    assert a == b
    other = str(tmp_path / "s2.bsvg")
    run(capsys, "gen", "step", "--dim", "1", "--level", "8", "--seed", "12", "--out", other)
    assert open(other, "rb").read() != a


def test_outputs_byte_identical(tmp_path, capsys):
    path = str(tmp_path / "n.bsvg")
    run(capsys, "gen", "nonrestriction", "--s", "0.4", "--p", "2", "--q", "6", "--J", "6", "--out", path)
    outs = [run(capsys, "norm", "--in", path, "--s", "0.4", "--p", "2", "--q", "6")[1] for _ in range(2)]
    assert outs[0] == outs[1]
    csvs = [run(capsys, "scan-restriction", "--in", path, "--rows", "40", "50", "--format", "csv")[1] for _ in range(2)]
    assert csvs[0] == csvs[1] and csvs[0].startswith("# seed=")


def test_lift_continuous_obstruction(tmp_path, capsys):
    path = str(tmp_path / "v.bsvg")
    run(capsys, "gen", "vortex", "--level", "5", "--out", path)
    code, out, err = run(capsys, "lift", "--in", path, "--method", "continuous")
    assert code == 2
    witness = json.loads(out)["obstruction"]
    assert witness["winding"] == 1 and len(witness["loop"]) >= 4
    assert json.loads(err)["error"] == "ObstructionDetected"


def test_lift_mollifier_collapse(tmp_path, capsys):
    path = str(tmp_path / "v.bsvg")
    run(capsys, "gen", "vortex", "--level", "6", "--domain", "torus", "--out", path)
    code, _, err = run(capsys, "lift", "--in", path, "--method", "mollifier")
    assert code == 2 and json.loads(err)["error"] == "ModulusCollapse"


def test_winding_and_pair(tmp_path, capsys):
    path = str(tmp_path / "v.bsvg")
    run(capsys, "gen", "vortex", "--level", "5", "--out", path)
    code, out, _ = run(capsys, "winding", "--in", path, "--format", "csv", "--nonzero-only")
    assert code == 0 and out.splitlines()[1:] == ["pair,i0,i1,winding", "01,15,15,1"]
    code, out, _ = run(capsys, "pair", "--in", path, "--r0", "0.1", "--r1", "0.3")
    assert code == 0 and json.loads(out)["pairing"]["singular"] == pytest.approx(np.pi, abs=1e-15)


def test_disintegrate(tmp_path, capsys):
    u2 = vortex(make_grid(2, 4, Domain.CUBE))
    g3 = make_grid(3, 4, Domain.CUBE)
    path = write(tmp_path, "v3.bsvg", GridFunction(g3, np.broadcast_to(u2.values[:, :, None], g3.shape)))
    code, out, _ = run(capsys, "disintegrate", "--in", path, "--alpha", "2")
    doc = json.loads(out)
    assert code == 0 and doc["equal"] and doc["lhs"] != 0


def test_scan_spec(tmp_path, capsys):
    code, out, _ = run(capsys, "scan-restriction", "--s", "0.4", "--p", "2", "--q", "6", "--J", "6", "7", "--row-count", "3")
    rows = json.loads(out)["rows"]
    assert code == 0 and [r["J"] for r in rows] == [6, 6, 6, 7, 7, 7]


@pytest.mark.parametrize(
    "argv",
    [
        ["norm", "--s", "-1", "--p", "2", "--in", "x"],
        ["norm", "--s", "0.3", "--p", "2", "--q", "abc", "--in", "x"],
        ["norm", "--s", "0.3", "--p", "2"],
        ["bogus"],
        ["gen", "vortex"],
        ["verify", "--suite", "42"],
    ],
)
def test_invalid_args(argv, capsys):
    code, _, err = run(capsys, *argv)
    assert code == 3
    assert "error" in json.loads(err)


def test_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "norm", "--in", str(tmp_path / "nope.bsvg"), "--s", "0.3", "--p", "2")
    assert code == 3 and json.loads(err)["error"] == "IOError"


def test_degenerate_edge_exit(tmp_path, capsys):
    g = make_grid(2, 1, Domain.CUBE)
    path = write(tmp_path, "d.bsvg", GridFunction(g, np.array([[1, -1], [1, 1]], dtype=complex)))
    code, _, err = run(capsys, "winding", "--in", path)
    assert code == 3 and json.loads(err)["error"] == "DegenerateEdge"


def test_verify_subset(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "2", "--format", "csv")
    assert code == 0
    assert out.splitlines()[0].startswith("[PASS] criterion  2")


def test_module_entry_point(tmp_path):
    g = make_grid(1, 3)
    path = write(tmp_path, "c.bsvg", GridFunction(g, np.full(8, 2.0)))
    proc = subprocess.run(
        [sys.executable, "-m", "besovlift", "norm", "--in", path, "--method", "haar-avg", "--s", "0.3", "--p", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["reports"][0]["total"] == 2.0
    assert haar_average_norm(bsvg.read(path), BesovParams.of(0.3, 2, 2)).total == 2.0
