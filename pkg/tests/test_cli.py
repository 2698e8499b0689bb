import json
import os
import subprocess
import sys

import numpy as np
import pytest

from moebius_lab import minkowski as mk
from moebius_lab import zoo
from moebius_lab.cli import (EXIT_INPUT, EXIT_OK, EXIT_REFUSED, EXIT_RESIDUAL, default_tol, load_doc, load_gcr,
                             load_lift, main, read_mesh, save_gcr, save_lift, subsample)
from moebius_lab.gcr import gcr_data_from_lift


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


@pytest.fixture
def cyclide_file(tmp_path, capsys):
    p = str(tmp_path / "cyc.json")
    code, rep = run(capsys, "analyze", "--zoo", "dupin_cyclide", "--grid", "32", "-o", p)
    assert code == EXIT_OK and rep["status"] == "PASS"
    return p


def test_analyze_reports(capsys, tmp_path):
    code, rep = run(capsys, "analyze", "--zoo", "cylinder", "--grid", "32x32", "--r", "2.0")
    assert code == EXIT_OK
    assert rep["info"]["isothermic"] is True
    assert rep["checks"]["kappa_closed_form"]["pass"]
    assert rep["tol"] == pytest.approx(default_tol(zoo.cylinder(r=2.0, N=32).lift.chart, 2))


def test_analyze_lift_input(capsys, tmp_path):
    p = str(tmp_path / "hopf.json")
    save_lift(p, zoo.hopf_torus(N=32).lift)
    code, rep = run(capsys, "analyze", "--input", p)
    assert code == EXIT_OK and rep["info"]["isothermic"] is False


def test_save_load_bit_exact(tmp_path):
    for d in (zoo.cylinder(N=16).data, gcr_data_from_lift(zoo.holomorphic_graph(N=16).lift),
              gcr_data_from_lift(zoo.helix(N=32).lift), zoo.guichard_net(N=12).data):
        p = str(tmp_path / "d.json")
        save_gcr(p, d)
        text = open(p).read()
        e = load_gcr(p)
        save_gcr(p, e)
        assert open(p).read() == text
        for name in ("qM", "kappa", "ns", "metric", "II0", "A", "beta"):
            a, b = getattr(d, name), getattr(e, name)
            assert (a is None) == (b is None)
            if a is not None:
                assert a.values.tobytes() == b.values.tobytes() and a.margins == b.margins
    lift = zoo.quadric(N=16).lift
    save_lift(p, lift)
    assert load_lift(p).sigma.values.tobytes() == lift.sigma.values.tobytes()


def test_verify_and_convergence(capsys, tmp_path):
    # subsampling measures the residual operators, so the file holds analytic data
    p = str(tmp_path / "gui.json")
    save_gcr(p, zoo.guichard_net(N=32).data)
    code, rep = run(capsys, "verify", p, "--convergence", "h,h/2,h/4")
    assert code == EXIT_OK
    orders = [v["order"] for k, v in rep["convergence"].items() if k != "h"]
    assert "exact" in orders
    assert all(o == "exact" or abs(o - 2) < 0.3 for o in orders)


def test_verify_fails_on_bad_data(capsys, tmp_path):
    d = zoo.sphere(N=32).data
    x, _ = d.chart.mesh()
    p = str(tmp_path / "bad.json")
    save_gcr(p, d.replace(kappa=d.kappa.with_values(0.2 * np.cos(x)[..., None] + 0j)))
    # the default 50 h^2 is loose at N = 32, so the tolerance is explicit
    assert run(capsys, "verify", p)[0] == EXIT_OK
    code, rep = run(capsys, "verify", p, "--tol", "1e-2")
    assert code == EXIT_RESIDUAL and rep["failing"]
    code, rep = run(capsys, "reconstruct", p, "--tol", "1e-2")
    assert code == EXIT_REFUSED and rep["status"] == "REFUSED"


def test_input_errors(capsys, tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert run(capsys, "verify", str(p))[0] == EXIT_INPUT
    p.write_text(json.dumps({"version": 1, "m": 2, "n": 3, "chart": {}, "fields": {}, "extra": 1}))
    assert run(capsys, "verify", str(p))[0] == EXIT_INPUT
    assert run(capsys, "verify", str(tmp_path / "missing.json"))[0] == EXIT_INPUT
    assert run(capsys, "analyze", "--zoo", "nope")[0] == EXIT_INPUT
    assert run(capsys, "analyze", "--r", "2")[0] == EXIT_INPUT
    assert run(capsys, "analyze", "--zoo", "sphere", "--grid", "abc")[0] == EXIT_INPUT


def test_hex_mismatch_rejected(capsys, tmp_path, cyclide_file):
    doc = load_doc(cyclide_file)
    doc["fields"]["qM"]["data"][0] += 1.0
    bad = str(tmp_path / "bad.json")
    with open(bad, "w") as fh:
        json.dump(doc, fh)
    assert run(capsys, "verify", bad)[0] == EXIT_INPUT
    doc["fields"]["qM"]["data"][0] = "1.0"
    with open(bad, "w") as fh:
        json.dump(doc, fh)
    code, rep = run(capsys, "verify", bad)
    assert code == EXIT_INPUT and "fields/qM/data" in rep["message"]


def test_reconstruct_and_align(capsys, tmp_path, cyclide_file):
    a, b = str(tmp_path / "a.obj"), str(tmp_path / "b.obj")
    assert run(capsys, "reconstruct", cyclide_file, "-o", a)[0] == EXIT_OK
    assert run(capsys, "reconstruct", cyclide_file, "--base-frame", "random:7", "-o", b)[0] == EXIT_OK
    assert read_mesh(a).chart.shape == read_mesh(b).chart.shape
    code, rep = run(capsys, "align", a, b)
    # meshes come back in the stereographic gauge: agreement is O(h^2), not exact
    assert code == EXIT_OK and rep["distance"] < 10 * (2.0 / 32) ** 2
    c = str(tmp_path / "c.csv")
    assert run(capsys, "reconstruct", cyclide_file, "--export", "csv", "-o", c)[0] == EXIT_OK
    assert np.max(mk.projective_distance(read_mesh(c).sigma.values, read_mesh(a).sigma.values)) < 1e-10


def test_deform_negative_params(capsys, tmp_path, cyclide_file):
    out = str(tmp_path / "fam")
    code, rep = run(capsys, "deform", cyclide_file, "--family", "mobiusflat", "--params=-1,0.5,2",
                    "-o", out, "--export", "obj")
    assert code == EXIT_OK
    assert [r["param"] for r in rep["results"]] == [-1.0, 0.5, 2.0]
    assert sorted(os.listdir(out)) == [f"mobiusflat_{i:02d}.{e}" for i in range(3) for e in ("json", "obj")]


def test_subsample():
    d = zoo.dupin_cyclide(N=32).data
    s = subsample(d, 2)
    assert s.chart.shape == (17, 17)
    assert np.array_equal(s.kappa.values, d.kappa.values[::2, ::2])


def test_module_entry_point_is_deterministic(tmp_path):
    outs = []
    for run_dir in ("a", "b"):
        w = tmp_path / run_dir
        w.mkdir()
        r = subprocess.run([sys.executable, "-m", "moebius_lab", "analyze", "--zoo", "hopf_torus", "--grid", "16",
                            "-o", "h.json"], cwd=w, capture_output=True, text=True)
        assert r.returncode == EXIT_OK, r.stderr
        assert json.loads(r.stdout)["command"] == "analyze"
        assert "analyze" in r.stderr
        outs.append((w / "h.json").read_bytes())
    assert outs[0] == outs[1]
