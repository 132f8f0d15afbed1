import numpy as np
import pytest

from demorph import triangulation as tg
from demorph.errors import DegenerateGeometryError
from demorph.landmarks import augment_border_landmarks


def brute_force_delaunay_check(points, tris, tol=1e-9):
    """Independent oracle: no point strictly inside any circumcircle."""
    pts = np.asarray(points, dtype=np.float64)
    for a, b, c in tris:
        (ux, uy), r2 = tg.circumcircle(pts[a], pts[b], pts[c])
        for i, p in enumerate(pts):
            if i in (a, b, c):
                continue
            d2 = (p[0] - ux) ** 2 + (p[1] - uy) ** 2
            assert d2 >= r2 * (1.0 - 1e-9) - tol, (
                f"point {i} strictly inside circumcircle of {(a, b, c)}"
            )


def test_three_points_single_triangle():
    tris = tg.triangulate([(0, 0), (4, 0), (0, 3)])
    assert tris.shape == (1, 3)
    assert set(tris[0]) == {0, 1, 2}


def test_unit_square_two_triangles_empty_circumcircles():
    pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
    tris = tg.triangulate(pts)
    assert tris.shape == (2, 3)
    brute_force_delaunay_check(pts, tris)


def test_too_few_points():
    with pytest.raises(DegenerateGeometryError):
        tg.triangulate([(0, 0), (1, 1)])


def test_collinear_points():
    with pytest.raises(DegenerateGeometryError):
        tg.triangulate([(0, 0), (1, 1), (2, 2), (3, 3)])


def test_duplicate_points():
    with pytest.raises(DegenerateGeometryError):
        tg.triangulate([(0, 0), (1, 0), (1, 0), (0, 1)])


def test_85_point_morph_set_count():
    # 65 interior facial points + 20 border points on the hull
    rng = np.random.default_rng(5)
    facial = rng.uniform(20, 107, (65, 2))
    pts = augment_border_landmarks(facial, 128, 128)
    tris = tg.triangulate(pts)
    h = tg.convex_hull_vertex_count(pts)
    assert h == 20
    assert len(tris) == 2 * 85 - h - 2 == 148


def test_triangle_count_formula_random_sets():
    rng = np.random.default_rng(11)
    for trial in range(100):
        n = int(rng.integers(4, 40))
        pts = rng.uniform(0, 100, (n, 2))
        tris = tg.triangulate(pts)
        h = tg.convex_hull_vertex_count(pts)
        assert len(tris) == 2 * n - h - 2, f"trial {trial}: n={n} h={h} m={len(tris)}"


def test_empty_circumcircle_random_sets():
    rng = np.random.default_rng(12)
    for _ in range(20):
        n = int(rng.integers(4, 21))
        pts = rng.uniform(0, 50, (n, 2))
        tris = tg.triangulate(pts)
        brute_force_delaunay_check(pts, tris)


def test_hull_area_tiling():
    rng = np.random.default_rng(13)
    for _ in range(30):
        n = int(rng.integers(5, 40))
        pts = rng.uniform(0, 10, (n, 2))
        tris = tg.triangulate(pts)
        tri_area = sum(abs(tg.triangle_area(pts[a], pts[b], pts[c])) for a, b, c in tris)
        hull_area = tg.polygon_area(tg.convex_hull(pts))
        assert abs(tri_area - hull_area) <= 1e-6 * hull_area


def test_mesh_structurally_valid():
    rng = np.random.default_rng(14)
    pts = rng.uniform(0, 100, (30, 2))
    tris = tg.triangulate(pts)
    assert tg.mesh_is_valid(pts, tris)


def test_every_point_is_a_vertex():
    rng = np.random.default_rng(15)
    facial = rng.uniform(30, 97, (65, 2))
    pts = augment_border_landmarks(facial, 128, 128)
    tris = tg.triangulate(pts)
    assert set(tris.ravel().tolist()) == set(range(85))


def test_triangulation_deterministic():
    rng = np.random.default_rng(16)
    pts = rng.uniform(0, 100, (40, 2))
    assert np.array_equal(tg.triangulate(pts), tg.triangulate(pts))
