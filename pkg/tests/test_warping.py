import numpy as np
import pytest

from demorph import triangulation as tg
from demorph import warping as wp
from demorph.errors import DegenerateGeometryError, ParameterError, ShapeError
from demorph.landmarks import augment_border_landmarks


def checker_image(rng, size=64):
    img = rng.uniform(-1, 1, (size, size, 3))
    return img


@pytest.fixture
def mesh_setup():
    rng = np.random.default_rng(21)
    facial = rng.uniform(12, 51, (65, 2))
    pts = augment_border_landmarks(facial, 64, 64)
    mesh = tg.triangulate(pts)
    img = checker_image(rng)
    return img, pts, mesh


def test_identity_warp(mesh_setup):
    img, pts, mesh = mesh_setup
    res = wp.warp_image(img, pts, pts, mesh)
    assert res.skipped_triangles == 0
    assert np.abs(res.image - img).max() < 1e-6


def test_integer_translation_oracle():
    # landmarks shifted by an integer offset: interior pixels must equal
    # source pixels shifted by the same offset
    rng = np.random.default_rng(22)
    img = checker_image(rng)
    src = np.array([(10.0, 10.0), (50.0, 12.0), (30.0, 52.0), (12.0, 40.0)])
    dx, dy = 3, 5
    dst = src + [dx, dy]
    mesh = tg.triangulate(src)
    res = wp.warp_image(img, src, dst, mesh)
    ys, xs = np.mgrid[0:64, 0:64]
    inside = np.zeros((64, 64), dtype=bool)
    for a, b, c in mesh:
        d = dst[[a, b, c]]
        area = (d[1, 0] - d[0, 0]) * (d[2, 1] - d[0, 1]) - (d[2, 0] - d[0, 0]) * (d[1, 1] - d[0, 1])
        l1 = ((xs - d[0, 0]) * (d[2, 1] - d[0, 1]) - (d[2, 0] - d[0, 0]) * (ys - d[0, 1])) / area
        l2 = ((d[1, 0] - d[0, 0]) * (ys - d[0, 1]) - (xs - d[0, 0]) * (d[1, 1] - d[0, 1])) / area
        inside |= (l1 >= 0.01) & (l2 >= 0.01) & (l1 + l2 <= 0.99)
    shifted = np.roll(np.roll(img, dy, axis=0), dx, axis=1)
    diff = np.abs(res.image - shifted)[inside]
    assert inside.sum() > 200
    assert diff.max() < 1e-9


def test_uniform_scale_bilinear_oracle():
    # one triangle scaled 2x about the origin: sampling must match a direct
    # bilinear evaluation of the inverse map
    rng = np.random.default_rng(23)
    img = checker_image(rng)
    src = np.array([(2.0, 2.0), (20.0, 4.0), (6.0, 24.0)])
    dst = src * 2.0
    mesh = np.array([[0, 1, 2]])
    res = wp.warp_image(img, src, dst, mesh)

    from demorph.kernels.reference import _bilinear

    ys, xs = np.mgrid[0:64, 0:64]
    area = (dst[1, 0] - dst[0, 0]) * (dst[2, 1] - dst[0, 1]) - (dst[2, 0] - dst[0, 0]) * (
        dst[1, 1] - dst[0, 1]
    )
    l1 = ((xs - dst[0, 0]) * (dst[2, 1] - dst[0, 1]) - (dst[2, 0] - dst[0, 0]) * (ys - dst[0, 1])) / area
    l2 = ((dst[1, 0] - dst[0, 0]) * (ys - dst[0, 1]) - (xs - dst[0, 0]) * (dst[1, 1] - dst[0, 1])) / area
    strict = (l1 >= 0.01) & (l2 >= 0.01) & (l1 + l2 <= 0.99)
    expected = _bilinear(img, xs[strict] * 0.5, ys[strict] * 0.5)
    assert strict.sum() > 100
    assert np.abs(res.image[strict] - expected).max() < 1e-5


def test_warp_preserves_value_range(mesh_setup):
    img, pts, mesh = mesh_setup
    rng = np.random.default_rng(24)
    jitter = rng.uniform(-3, 3, pts.shape)
    jitter[65:] = 0.0
    dst = np.clip(pts + jitter, 0, 63)
    res = wp.warp_image(img, pts, dst, mesh)
    assert res.image.min() >= -1.0 - 1e-12
    assert res.image.max() <= 1.0 + 1e-12


def test_degenerate_destination_triangle_skipped():
    rng = np.random.default_rng(25)
    img = checker_image(rng)
    src = np.array([(5.0, 5.0), (30.0, 5.0), (5.0, 30.0)])
    dst = np.array([(5.0, 5.0), (30.0, 5.0), (17.5, 5.0)])  # zero area
    res = wp.warp_image(img, src, dst, np.array([[0, 1, 2]]))
    assert res.skipped_triangles == 1
    assert np.array_equal(res.image, img)


def test_blend_degenerate_cases():
    rng = np.random.default_rng(26)
    i1 = checker_image(rng)
    i2 = checker_image(rng)
    assert np.array_equal(wp.blend(i1, i2, 0.0), i1)
    assert np.array_equal(wp.blend(i1, i2, 1.0), i2)


def test_blend_arithmetic():
    i1 = np.full((4, 4, 3), 0.2)
    i2 = np.full((4, 4, 3), 0.6)
    out = wp.blend(i1, i2, 0.5)
    assert np.abs(out - 0.4).max() < 1e-12


def test_blend_symmetry_property():
    rng = np.random.default_rng(27)
    i1 = checker_image(rng, 16)
    i2 = checker_image(rng, 16)
    for alpha in (0.0, 0.25, 0.7, 1.0):
        a = wp.blend(i1, i2, alpha)
        b = wp.blend(i2, i1, 1.0 - alpha)
        assert np.abs(a - b).max() < 1e-12


def test_blend_shape_mismatch():
    with pytest.raises(ShapeError):
        wp.blend(np.zeros((4, 4, 3)), np.zeros((5, 5, 3)), 0.5)


def test_blend_alpha_out_of_range():
    with pytest.raises(ParameterError):
        wp.blend(np.zeros((4, 4, 3)), np.zeros((4, 4, 3)), 1.5)


def _two_faces(size=64):
    rng = np.random.default_rng(28)
    from demorph.landmarks import morph_landmarks_from_68
    from demorph.synthfaces import make_identity, render_synthetic_face

    i1, k1 = render_synthetic_face(make_identity(9, 0), 0, size)
    i2, k2 = render_synthetic_face(make_identity(9, 1), 0, size)
    m1 = morph_landmarks_from_68(k1, size, size)
    m2 = morph_landmarks_from_68(k2, size, size)
    return i1, m1, i2, m2


def test_morph_alpha_beta_zero_is_first_image():
    i1, k1, i2, k2 = _two_faces()
    out = wp.morph(i1, k1, i2, k2, wp.MorphParams(0.0, 0.0))
    assert np.abs(out - i1).max() < 1e-9


def test_morph_alpha_beta_one_is_second_image():
    i1, k1, i2, k2 = _two_faces()
    out = wp.morph(i1, k1, i2, k2, wp.MorphParams(1.0, 1.0))
    assert np.abs(out - i2).max() < 1e-9


def test_morph_midpoint_closer_than_contributors():
    # mean-L1 oracle: the morph is nearer each warped contributor than the
    # warped contributors are to each other
    i1, k1, i2, k2 = _two_faces()
    from demorph.landmarks import interpolate_landmarks
    from demorph.triangulation import triangulate

    mid = interpolate_landmarks(k1, k2, 0.5)
    mesh = triangulate(mid)
    w1 = wp.warp_image(i1, k1, mid, mesh).image
    w2 = wp.warp_image(i2, k2, mid, mesh).image
    out = wp.morph(i1, k1, i2, k2, wp.MorphParams(0.5, 0.5))

    def l1(a, b):
        return float(np.abs(a - b).mean())

    assert l1(out, w1) < l1(w1, w2)
    assert l1(out, w2) < l1(w1, w2)


def test_morph_output_within_warped_bounds():
    i1, k1, i2, k2 = _two_faces()
    from demorph.landmarks import interpolate_landmarks
    from demorph.triangulation import triangulate

    alpha, beta = 0.3, 0.5
    mid = interpolate_landmarks(k1, k2, beta)
    mesh = triangulate(mid)
    w1 = wp.warp_image(i1, k1, mid, mesh).image
    w2 = wp.warp_image(i2, k2, mid, mesh).image
    out = wp.morph(i1, k1, i2, k2, wp.MorphParams(alpha, beta))
    lo = np.minimum(w1, w2) - 1e-6
    hi = np.maximum(w1, w2) + 1e-6
    assert (out >= lo).all() and (out <= hi).all()


# --- alignment ---------------------------------------------------------------


def test_align_identity_at_canonical_positions():
    rng = np.random.default_rng(29)
    img = rng.uniform(-1, 1, (128, 128, 3))
    template = wp.canonical_five_points(128)
    aligned, m = wp.align_face(img, template, 128)
    assert np.allclose(m, [[1, 0, 0], [0, 1, 0]], atol=1e-9)
    assert np.abs(aligned - img).max() < 1e-9


def test_align_recovers_rotation():
    template = wp.canonical_five_points(128)
    theta = np.deg2rad(10.0)
    c, s = np.cos(theta), np.sin(theta)
    center = np.array([64.0, 64.0])
    rotated = (template - center) @ np.array([[c, -s], [s, c]]).T + center
    rng = np.random.default_rng(30)
    img = rng.uniform(-1, 1, (128, 128, 3))
    aligned, m = wp.align_face(img, rotated, 128)
    recovered = wp.apply_affine(m, rotated)
    assert np.abs(recovered - template).max() < 0.5


def test_align_recovers_inverse_scale():
    template = wp.canonical_five_points(128)
    scaled = template * 2.0
    rng = np.random.default_rng(31)
    img = rng.uniform(-1, 1, (128, 128, 3))
    _, m = wp.align_face(img, scaled, 128)
    _, scale = wp.similarity_fit(scaled, template)
    assert abs(scale - 0.5) < 1e-6
    assert abs(np.hypot(m[0, 0], m[1, 0]) - 0.5) < 1e-6


def test_align_rejects_collinear():
    pts = np.array([[10.0, 10.0], [20.0, 20.0], [30.0, 30.0], [40.0, 40.0], [50.0, 50.0]])
    img = np.zeros((128, 128, 3))
    with pytest.raises(DegenerateGeometryError):
        wp.align_face(img, pts, 128)


def test_align_wrong_point_count():
    img = np.zeros((128, 128, 3))
    with pytest.raises(ShapeError):
        wp.align_face(img, np.zeros((4, 2)), 128)
