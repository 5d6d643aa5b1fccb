import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import entropy_bits, normal_entropy_oracle, sphere_occlusion
from vqfield import shapes
from vqfield.mesh import TriangleMesh, normalize
from vqfield.metrics import (MetricParams, QualityVector, evaluate_view, gray_histogram,
                             normal_entropy, normal_histogram, self_occlusion_ratio,
                             shannon_entropy, visual_entropy)
from vqfield.raycast import VisibilityReport, build_accel, face_visibility
from vqfield.render import GrayImage, Mask
from vqfield.viewsphere import ViewpointGrid, camera_pose, look_at

ROT_TO_X = np.array([[0, 0, 1.0], [0, 1, 0], [-1, 0, 0]])
CORNER = np.ones(3) / math.sqrt(3) * 2.5


def report_for(mesh, cam, n=10):
    return face_visibility(build_accel(mesh), mesh, cam, n)


def test_shannon_entropy_basics():
    assert shannon_entropy([5]) == 0.0
    assert shannon_entropy([0, 0]) == 0.0
    assert shannon_entropy([1, 1]) == 1.0
    assert shannon_entropy([1, 1, 1, 1]) == 2.0
    assert shannon_entropy([3, 1, 0, 2]) == pytest.approx(entropy_bits([3, 1, 2]), abs=1e-15)


def test_occlusion_single_triangle():
    tri = TriangleMesh(np.array([[0, -1, -1], [0, 1, -1], [0, 0, 1.0]]), np.array([[0, 1, 2]]))
    cam = look_at(np.array([2.5, 0, 0]))
    assert self_occlusion_ratio(report_for(tri, cam), tri) == 0.0


def test_occlusion_cube(cube):
    assert self_occlusion_ratio(report_for(cube, look_at(np.array([2.5, 0, 0]))), cube) == \
        pytest.approx(5 / 6, abs=0.01)
    assert self_occlusion_ratio(report_for(cube, look_at(CORNER)), cube) == pytest.approx(0.5, abs=0.01)


def test_occlusion_sphere_views(sphere3):
    accel = build_accel(sphere3)
    grid = ViewpointGrid()
    for i in (0, 33, 70, 131):
        r = face_visibility(accel, sphere3, camera_pose(grid, i))
        assert self_occlusion_ratio(r, sphere3) == pytest.approx(sphere_occlusion(2.5), abs=0.02)


def test_convex_occlusion_equals_backfacing_area(sphere3):
    accel = build_accel(sphere3)
    grid = ViewpointGrid()
    for i in (5, 61, 120):
        cam = camera_pose(grid, i)
        r = face_visibility(accel, sphere3, cam)
        c = sphere3.corners().mean(axis=1)
        back = np.einsum("ij,ij->i", cam.position - c, sphere3.face_normals) <= 0
        expected = sphere3.face_areas[back].sum() / sphere3.total_area
        assert self_occlusion_ratio(r, sphere3) == pytest.approx(expected, abs=1e-12)


def test_plate_face_on_normal_entropy_zero():
    plate = shapes.square().transformed(ROT_TO_X)
    cam = look_at(np.array([2.5, 0, 0]))
    r = report_for(plate, cam)
    assert r.fully_visible.all()
    assert normal_entropy(r, plate, cam) == 0.0


def test_cube_corner_normal_entropy(cube):
    cam = look_at(CORNER)
    r = report_for(cube, cam)
    h = normal_entropy(r, cube, cam)
    assert h == pytest.approx(3 / 256 * math.log2(3), abs=1e-4)
    assert h == pytest.approx(normal_entropy_oracle(cube.face_normals[r.fully_visible],
                                                    cam.position, cam.right), abs=1e-12)
    hist = normal_histogram(r, cube, cam)
    assert hist.sum() == 6 and np.count_nonzero(hist) == 3


def test_normal_entropy_matches_oracle_on_fixtures(fixtures):
    grid = ViewpointGrid()
    for mesh in fixtures.values():
        accel = build_accel(mesh)
        for i in (7, 66, 125):
            cam = camera_pose(grid, i)
            r = face_visibility(accel, mesh, cam)
            ref = normal_entropy_oracle(mesh.face_normals[r.fully_visible], cam.position, cam.right)
            assert normal_entropy(r, mesh, cam) == pytest.approx(ref, abs=1e-12)


def test_normal_entropy_bounds(fixtures):
    grid = ViewpointGrid()
    p = MetricParams()
    for mesh in fixtures.values():
        accel = build_accel(mesh)
        cam = camera_pose(grid, 50)
        r = face_visibility(accel, mesh, cam)
        hist = normal_histogram(r, mesh, cam, p)
        occ = np.count_nonzero(hist)
        h = normal_entropy(r, mesh, cam, p)
        assert 0 <= h <= occ / p.n_all * math.log2(max(occ, 1)) + 1e-12 <= math.log2(p.n_all)


def test_normal_entropy_nothing_visible(cube):
    cam = look_at(np.array([2.5, 0, 0]))
    r = VisibilityReport(np.zeros(cube.n_faces), np.zeros(cube.n_faces, bool), 10)
    assert normal_entropy(r, cube, cam) == 0.0
    assert self_occlusion_ratio(r, cube) == 1.0


def test_area_weighted_histogram(cube):
    big = cube.transformed(np.diag([2.0, 1.0, 1.0]))
    cam = look_at(CORNER * 2)
    r = report_for(big, cam)
    counts = normal_histogram(r, big, cam, MetricParams())
    weighted = normal_histogram(r, big, cam, MetricParams(area_weighted=True))
    assert sorted(counts[counts > 0]) == [2, 2, 2]
    assert sorted(weighted[weighted > 0]) == pytest.approx([1.0, 2.0, 2.0])


def test_icosphere_normal_entropy_symmetric():
    # subdivision 5: at subdivision 4 the tessellation alone spreads H_geo by ~3.4%
    sphere = normalize(shapes.icosphere(5))
    accel = build_accel(sphere)
    grid = ViewpointGrid()
    h = []
    for i in range(len(grid)):
        cam = camera_pose(grid, i)
        h.append(normal_entropy(face_visibility(accel, sphere, cam), sphere, cam))
    h = np.array(h)
    assert (h.max() - h.min()) / h.mean() < 0.03


def gray(values, mask=None):
    values = np.asarray(values, float)
    return GrayImage(values), Mask(np.ones(values.shape, bool) if mask is None else mask)


def test_visual_entropy_constant():
    assert visual_entropy(*gray(np.full((20, 20), 0.37))) == 0.0


def test_visual_entropy_two_levels():
    v = np.full((16, 16), 0.25)
    v[:, 8:] = 0.75
    mask = np.ones((16, 16), bool)
    assert abs(visual_entropy(*gray(v, mask)) - 1.0) <= 1e-9
    # background pixels are ignored
    v2 = np.zeros((16, 20))
    v2[:, :16] = v
    m2 = np.zeros((16, 20), bool)
    m2[:, :16] = True
    assert abs(visual_entropy(*gray(v2, m2)) - 1.0) <= 1e-9


def test_visual_entropy_uniform_max():
    rng = np.random.default_rng(0)
    h = visual_entropy(*gray(rng.random((1000, 1000))))
    assert 7.98 <= h <= 8.0


def test_visual_entropy_empty_mask_and_mismatch():
    assert visual_entropy(*gray(np.ones((4, 4)), np.zeros((4, 4), bool))) == 0.0
    with pytest.raises(ValueError):
        gray_histogram(GrayImage(np.ones((4, 4))), Mask(np.ones((4, 5), bool)))


def test_gray_histogram_edges():
    g, m = gray(np.array([[0.0, 1.0, 0.5, 1 / 256]]))
    hist = gray_histogram(g, m, 256)
    assert hist[0] == 1 and hist[255] == 1 and hist[128] == 1 and hist[1] == 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=300), st.randoms())
def test_visual_entropy_bounds_and_permutation(values, rnd):
    arr = np.array(values)
    h = visual_entropy(*gray(arr[None, :]))
    assert 0.0 <= h <= 8.0
    perm = arr.copy()
    rnd.shuffle(perm)
    assert visual_entropy(*gray(perm[None, :])) == pytest.approx(h, abs=1e-12)


def test_metric_params():
    p = MetricParams(4, 16, 64, 5, 32, True)
    assert p.n_all == 64
    assert MetricParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        MetricParams(gray_bins=0)


def test_evaluate_view_ranges(fixtures):
    grid = ViewpointGrid()
    p = MetricParams(image_size=64)
    for mesh in fixtures.values():
        q = evaluate_view(build_accel(mesh), mesh, camera_pose(grid, 80), p)
        assert isinstance(q, QualityVector)
        assert 0 <= q.occlusion_ratio <= 1
        assert 0 <= q.normal_entropy <= math.log2(p.n_all)
        assert 0 <= q.visual_entropy <= math.log2(p.gray_bins)
