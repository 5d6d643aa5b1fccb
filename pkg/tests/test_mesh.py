import math
import struct

import numpy as np
import pytest

from vqfield import shapes
from vqfield.mesh import (EmptyMeshError, MeshParseError, TriangleMesh, bounding_sphere,
                          face_properties, load_mesh, minimal_bounding_sphere, normalize,
                          ritter_bounding_sphere, sanitize, save_obj)

CUBE_OBJ = """\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
vn 0 0 1
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_obj_quads_cube(tmp_path):
    m = load_mesh(write(tmp_path, "cube.obj", CUBE_OBJ))
    assert m.n_faces == 12
    assert m.total_area == pytest.approx(6.0, abs=1e-9)
    # quads fan into (0,1,2), (0,2,3)
    assert m.triangles[:2].tolist() == [[0, 3, 2], [0, 2, 1]]


def test_outward_winding_gives_outward_normals(tmp_path):
    m = load_mesh(write(tmp_path, "cube.obj", CUBE_OBJ))
    centroids = m.corners().mean(axis=1) - 0.5
    assert np.all(np.einsum("ij,ij->i", centroids, m.face_normals) > 0)


def test_degenerate_triangle_removed(tmp_path):
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nf 1 2 4\nf 1 2 3\n"
    m = load_mesh(write(tmp_path, "d.obj", text))
    assert m.n_faces == 1


def test_slash_and_negative_indices(tmp_path):
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf -3/1/1 -2/1/1 -1//1\n"
    m = load_mesh(write(tmp_path, "s.obj", text))
    assert m.triangles.tolist() == [[0, 1, 2]]


def test_vertex_colors_to_gray(tmp_path):
    text = "v 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 0 1 0 0 0 1\nf 1 2 3\n"
    m = load_mesh(write(tmp_path, "c.obj", text))
    assert m.albedo == pytest.approx([0.299, 0.587, 0.114])


def test_vertex_colors_8bit_scale(tmp_path):
    text = "v 0 0 0 255 255 255\nv 1 0 0 0 0 0\nv 0 1 0 255 0 0\nf 1 2 3\n"
    m = load_mesh(write(tmp_path, "c.obj", text))
    assert m.albedo == pytest.approx([1.0, 0.0, 0.299])


def test_missing_albedo_defaults_to_one(cube):
    assert np.all(cube.vertex_albedo() == 1.0)


@pytest.mark.parametrize("text", [
    "v 0 0 0\nv 1 0 0\nf 1 2\n",
    "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n",
    "v 0 0 0\nv 1 0 x\nv 0 1 0\nf 1 2 3\n",
    "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nv 2 2 0\nf 1 2 4 3 5\n",
])
def test_parse_errors(tmp_path, text):
    with pytest.raises(MeshParseError):
        load_mesh(write(tmp_path, "bad.obj", text))


def test_empty_mesh_error(tmp_path):
    with pytest.raises(EmptyMeshError):
        load_mesh(write(tmp_path, "e.obj", "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n"))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_mesh(tmp_path / "nope.obj")


def test_ascii_stl(tmp_path):
    text = ("solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\n"
            "vertex 0 1 0\nendloop\nendfacet\nfacet normal 0 0 1\nouter loop\n"
            "vertex 1 0 0\nvertex 1 1 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n")
    m = load_mesh(write(tmp_path, "t.stl", text))
    assert m.n_faces == 2 and len(m.vertices) == 4
    assert m.total_area == pytest.approx(1.0)


def test_binary_stl(tmp_path, cube):
    p = tmp_path / "cube.stl"
    with open(p, "wb") as fh:
        fh.write(b"\0" * 80 + struct.pack("<I", cube.n_faces))
        for tri in cube.corners():
            fh.write(struct.pack("<12fH", 0, 0, 0, *tri.ravel(), 0))
    m = load_mesh(p)
    assert m.n_faces == 12 and len(m.vertices) == 8
    assert m.total_area == pytest.approx(6.0)
    assert np.allclose(m.face_normals, cube.face_normals)


def test_obj_round_trip(tmp_path):
    m = shapes.with_albedo(shapes.icosphere(1), 0.25)
    save_obj(m, tmp_path / "s.obj")
    back = load_mesh(tmp_path / "s.obj")
    assert np.allclose(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.allclose(back.albedo, 0.25)


def test_icosphere_area():
    m = shapes.icosphere(3)
    assert m.n_faces == 1280
    assert abs(m.total_area - 4 * math.pi) / (4 * math.pi) < 0.02


def test_face_properties_single_triangle():
    n, a = face_properties(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float), np.array([[0, 1, 2]]))
    assert n[0].tolist() == [0, 0, 1]
    assert a[0] == 0.5


def test_cube_normals_per_axis(cube):
    for axis in np.vstack((np.eye(3), -np.eye(3))):
        sel = np.all(np.isclose(cube.face_normals, axis), axis=1)
        assert cube.face_areas[sel].sum() == pytest.approx(1.0)


def test_cyclic_permutation_invariance(rng):
    v = rng.normal(size=(3, 3))
    ref = face_properties(v, np.array([[0, 1, 2]]))
    for perm in ([1, 2, 0], [2, 0, 1]):
        n, a = face_properties(v, np.array([perm]))
        assert np.allclose(n, ref[0], atol=1e-12) and np.allclose(a, ref[1], rtol=1e-12)


def test_degenerate_face_properties_raise():
    with pytest.raises(ValueError):
        face_properties(np.zeros((3, 3)), np.array([[0, 1, 2]]))


def test_mesh_arrays_read_only(cube):
    with pytest.raises(ValueError):
        cube.vertices[0, 0] = 5.0


def test_normalize_offset_cube():
    m = shapes.box((10, 10, 10), (12, 12, 12))
    n = normalize(m)
    c, r = bounding_sphere(n.vertices)
    assert np.allclose(c, 0, atol=1e-6) and r == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(n.face_normals, m.face_normals)
    assert np.allclose(n.face_areas, m.face_areas / 3.0)  # scale 1/sqrt(3)


def test_normalize_idempotent(fixtures):
    for m in fixtures.values():
        assert np.allclose(normalize(m).vertices, m.vertices, atol=1e-9)


def test_normalize_scale_invariant():
    m = shapes.torus()
    assert np.allclose(normalize(m.transformed(scale=5.0)).vertices, normalize(m).vertices, atol=1e-6)


def test_normalized_sphere_area():
    m = shapes.icosphere(3, radius=4.0)
    assert normalize(m).total_area == pytest.approx(m.total_area / 16.0, rel=1e-9)


def test_minimal_sphere_contains_and_is_tight(rng):
    for _ in range(20):
        pts = rng.normal(size=(200, 3)) * rng.uniform(0.1, 3, size=3)
        c, r = minimal_bounding_sphere(pts)
        d = np.linalg.norm(pts - c, axis=1)
        assert d.max() <= r * (1 + 1e-9)
        # at least two support points lie on the boundary
        assert np.sum(d >= r * (1 - 1e-7)) >= 2


def test_minimal_sphere_two_points():
    c, r = minimal_bounding_sphere(np.array([[0, 0, 0], [2, 0, 0.0]]))
    assert np.allclose(c, [1, 0, 0]) and r == pytest.approx(1.0)


def test_minimal_sphere_beats_ritter(rng):
    pts = rng.normal(size=(500, 3))
    _, r_exact = minimal_bounding_sphere(pts)
    c, r = ritter_bounding_sphere(pts)
    assert np.linalg.norm(pts - c, axis=1).max() <= r * (1 + 1e-9)
    assert r_exact <= r + 1e-12


def test_sanitize_clips_albedo():
    m = sanitize(np.eye(3), [[0, 1, 2]], albedo=[0.5, 2.0, -0.1])
    assert m.albedo.tolist() == [0.5, 1.0, 0.0]
    with pytest.raises(ValueError):
        sanitize(np.eye(3), [[0, 1, 2]], albedo=[0.5, 0.5])


def test_transformed_rotation_preserves_area(cube):
    rot = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1.0]])
    m = cube.transformed(rot)
    assert isinstance(m, TriangleMesh)
    assert m.total_area == pytest.approx(6.0)
