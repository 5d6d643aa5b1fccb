import json
import os
import subprocess
import sys

import numpy as np
import pytest

from fields import fixture_fields, vqf_from_scores
from vqfield import shapes
from vqfield.cli import main
from vqfield.mesh import save_obj
from vqfield.render import read_pgm
from vqfield.viewsphere import ViewpointGrid
from vqfield.vqf import load_vqf, save_vqf

FAST = ["--res", "24", "--samples-per-face", "3"]


@pytest.fixture
def meshes(tmp_path):
    d = tmp_path / "meshes"
    d.mkdir()
    save_obj(shapes.cube(), d / "cube.obj")
    save_obj(shapes.nonconvex_fixtures()["l_bracket"], d / "bracket.obj")
    save_obj(shapes.icosphere(1), d / "ball.obj")
    return d


def test_compute_default_grid(meshes, tmp_path):
    out = tmp_path / "cube.vqf.json"
    assert main(["compute", str(meshes / "cube.obj"), "-o", str(out)] + FAST) == 0
    doc = json.loads(out.read_text())
    assert len(doc["values"]) == 132
    assert doc["grid"] == {"N_az": 12, "N_pol": 11, "radius": 2.5, "fov": 45.0}
    assert doc["params"]["samples_per_face"] == 3 and doc["params"]["image_size"] == 24
    cfg = doc["config"]
    assert cfg["weights"] == pytest.approx([1 / 3] * 3) and cfg["seed"] == 0
    assert cfg["mesh"] == "cube.obj"


def test_compute_small_grid_and_determinism(meshes, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = [str(meshes / "bracket.obj"), "--grid-az", "2", "--grid-pol", "1"] + FAST
    assert main(["compute", *args, "-o", str(a)]) == 0
    assert main(["compute", *args, "-o", str(b), "--threads", "2"]) == 0
    assert len(json.loads(a.read_text())["values"]) == 2
    doc_a, doc_b = json.loads(a.read_text()), json.loads(b.read_text())
    assert doc_a["values"] == doc_b["values"]
    assert main(["compute", *args, "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_compute_errors(meshes, tmp_path, caplog):
    assert main(["compute", str(tmp_path / "missing.obj"), "-o", str(tmp_path / "x")]) == 1
    assert "missing.obj" in caplog.text
    bad = tmp_path / "bad.obj"
    bad.write_text("v 0 0 0\nf 1 2 3\n")
    assert main(["compute", str(bad), "-o", str(tmp_path / "x")]) == 1
    assert main(["compute", str(meshes / "cube.obj"), "--grid-az", "1"]) == 2
    assert "--grid-az" in caplog.text
    assert main(["compute", str(meshes / "cube.obj"), "--res", "8"]) == 2
    assert "--res: must be at least 16" in caplog.text
    assert main(["compute", str(meshes / "cube.obj"), "--normal-bins", "8x"]) == 2
    assert main(["compute", str(meshes / "cube.obj"), "--weights", "0,0,0"]) == 2
    assert main(["compute", str(meshes / "cube.obj"), "--threads", "0"]) == 2


def test_batch(meshes, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["batch", str(meshes), str(out), "--grid-az", "3", "--grid-pol", "2"] + FAST) == 0
    assert "3 ok, 0 failed" in capsys.readouterr().out
    assert sorted(os.listdir(out)) == ["ball.vqf.json", "bracket.vqf.json", "cube.vqf.json"]


def test_batch_with_corrupt_file(meshes, tmp_path, capsys, caplog):
    (meshes / "ball.obj").unlink()
    (meshes / "broken.obj").write_text("v 1 2\nf 1 2 3\n")
    out = tmp_path / "out"
    code = main(["batch", str(meshes), str(out), "--grid-az", "2", "--grid-pol", "1"] + FAST)
    captured = capsys.readouterr()
    assert code != 0
    assert "2 ok, 1 failed: broken.obj" in captured.out
    assert "broken.obj" in caplog.text
    assert sorted(os.listdir(out)) == ["bracket.vqf.json", "cube.vqf.json"]


def test_batch_emit_views(meshes, tmp_path):
    (meshes / "ball.obj").unlink()
    (meshes / "bracket.obj").unlink()
    out = tmp_path / "out"
    assert main(["batch", str(meshes), str(out), "--emit-views", "--res", "16",
                 "--samples-per-face", "1"]) == 0
    files = os.listdir(out / "cube")
    assert sum(f.startswith("view_") for f in files) == 132
    assert sum(f.startswith("mask_") for f in files) == 132
    mask = read_pgm(out / "cube" / "mask_000.pgm")
    assert mask.shape == (16, 16) and set(np.unique(mask)) <= {0, 255}


def test_render(meshes, tmp_path):
    img, mask = tmp_path / "v.png", tmp_path / "m.pgm"
    assert main(["render", str(meshes / "cube.obj"), "--view", "60", "-o", str(img),
                 "--mask", str(mask), "--res", "32"]) == 0
    assert img.exists() and read_pgm(mask).max() == 255
    assert main(["render", str(meshes / "cube.obj"), "--view", "132", "-o", str(img)]) == 2


def write_field(path, name="equator"):
    save_vqf(vqf_from_scores(fixture_fields()[name].ravel(), mesh_id=name), path)


def test_optimize_vqf_full_reachability(tmp_path, capsys):
    f = tmp_path / "f.vqf.json"
    write_field(f)
    out = tmp_path / "traj.json"
    assert main(["optimize", "--vqf", str(f), "--start", "0", "--step-radius-deg", "180",
                 "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    goal = ViewpointGrid().index(4, 5)
    assert [r["viewpoint_index"] for r in doc["steps"]] == [0, goal]
    assert doc["converged"] is True
    assert "converged: True" in capsys.readouterr().out


def test_optimize_random_start_seeded(tmp_path):
    f = tmp_path / "f.vqf.json"
    write_field(f, "south")
    outs = []
    for k in range(2):
        out = tmp_path / f"t{k}.json"
        assert main(["optimize", "--vqf", str(f), "--start", "random", "--seed", "7",
                     "-o", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    start = json.loads(outs[0])["start"]
    assert start == int(np.random.default_rng(7).integers(132))


def test_optimize_file_sequence(tmp_path):
    d = tmp_path / "seq"
    d.mkdir()
    for k, name in enumerate(["equator", "near_pole", "south", "cosine"]):
        write_field(d / f"est_{k:02d}.vqf.json", name)
    out = tmp_path / "t.json"
    assert main(["optimize", "--vqf-dir", str(d), "--start", str(ViewpointGrid().index(0, 5)),
                 "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["steps"]) >= 2
    assert doc["metadata"]["max_steps"] == 4


def test_optimize_sequence_missing_step(tmp_path):
    d = tmp_path / "seq"
    d.mkdir()
    write_field(d / "est_00.vqf.json", "equator")
    code = main(["optimize", "--vqf-dir", str(d), "--start", "0", "--max-steps", "5"])
    assert code == 1


def test_optimize_agent_pos(tmp_path):
    f = tmp_path / "f.vqf.json"
    write_field(f)
    out = tmp_path / "w.json"
    assert main(["optimize", "--vqf", str(f), "--agent-pos", "0,-5,0", "--alpha", "0.5",
                 "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["metadata"]["alpha"] == 0.5 and doc["metadata"]["agent_position"] == [0, -5, 0]
    assert main(["optimize", "--vqf", str(f), "--agent-pos", "1,2"]) == 2


def test_optimize_mesh_emit_views(meshes, tmp_path):
    views = tmp_path / "views"
    assert main(["optimize", "--mesh", str(meshes / "bracket.obj"), "--start", "3",
                 "--emit-views", str(views)] + FAST) == 0
    assert len(os.listdir(views)) >= 1


def test_optimize_source_errors(tmp_path):
    f = tmp_path / "f.vqf.json"
    write_field(f)
    assert main(["optimize"]) == 2
    assert main(["optimize", "--vqf", str(f), "--vqf-dir", str(tmp_path)]) == 2
    assert main(["optimize", "--vqf", str(f), "--start", "500"]) == 2
    assert main(["optimize", "--vqf", str(f), "--start", "abc"]) == 2


def test_compare(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    write_field(a, "equator")
    write_field(b, "south")
    assert main(["compare", str(a), str(a)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["total"] == 0 and rep["lambdas"] == [0.3, 0.4, 0.3] and rep["silog_lambda"] == 0.85
    assert main(["compare", str(a), str(b), "--lambdas", "1,0,0"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["total"] == rep["l1"] > 0


def test_compare_grid_mismatch(tmp_path, caplog):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    write_field(a)
    small = ViewpointGrid(6, 5)
    save_vqf(vqf_from_scores(np.arange(30.0), grid=small), b)
    assert main(["compare", str(a), str(b)]) == 2
    assert "shape mismatch" in caplog.text


def test_heatmap(tmp_path):
    f = tmp_path / "f.vqf.json"
    write_field(f)
    out = tmp_path / "h.pgm"
    assert main(["heatmap", str(f), "--channel", "combined", "-o", str(out)]) == 0
    img = read_pgm(out)
    assert img.shape == (11, 12) and img[5, 4] == 255 and img.min() == 0
    assert main(["heatmap", str(f), "--channel", "occlusion", "--scale", "4",
                 "-o", str(tmp_path / "h.png")]) == 0
    assert main(["heatmap", str(tmp_path / "none.json"), "-o", str(out)]) == 1


def test_heatmap_constant_field(tmp_path):
    f = tmp_path / "c.json"
    v = vqf_from_scores(np.arange(132.0))
    v.values[..., 2] = 3.0
    save_vqf(v, f)
    out = tmp_path / "h.pgm"
    assert main(["heatmap", str(f), "--channel", "visual_entropy", "-o", str(out)]) == 0
    assert np.all(read_pgm(out) == 128)


def test_module_entry_point(tmp_path):
    f = tmp_path / "f.vqf.json"
    write_field(f)
    r = subprocess.run([sys.executable, "-m", "vqfield", "compare", str(f), str(f)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["total"] == 0
    r = subprocess.run([sys.executable, "-m", "vqfield", "bogus"], capture_output=True, text=True)
    assert r.returncode == 2


def test_loaded_vqf_matches_library(meshes, tmp_path):
    from vqfield.mesh import load_mesh, normalize
    from vqfield.metrics import MetricParams
    from vqfield.vqf import compute_vqf

    out = tmp_path / "c.json"
    assert main(["compute", str(meshes / "bracket.obj"), "-o", str(out), "--grid-az", "3",
                 "--grid-pol", "2"] + FAST) == 0
    ref = compute_vqf(normalize(load_mesh(meshes / "bracket.obj")), ViewpointGrid(3, 2),
                      MetricParams(samples_per_face=3, image_size=24))
    assert np.array_equal(load_vqf(out).values, ref.values)
