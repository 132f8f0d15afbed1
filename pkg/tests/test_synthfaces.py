import numpy as np

from demorph.synthfaces import make_identity, render_synthetic_face


def test_same_identity_variation_bitwise_identical():
    ident = make_identity(42, 3)
    img1, lms1 = render_synthetic_face(ident, 2, 64)
    img2, lms2 = render_synthetic_face(ident, 2, 64)
    assert np.array_equal(img1, img2)
    assert np.array_equal(lms1, lms2)


def test_variations_differ_but_landmarks_stay_close():
    # pairwise landmark deviation below 5% of the image width, images differ
    for master in (0, 1):
        for idx in range(10):
            ident = make_identity(master, idx)
            renders = [render_synthetic_face(ident, v, 128) for v in range(5)]
            for i in range(len(renders)):
                for j in range(i + 1, len(renders)):
                    assert not np.array_equal(renders[i][0], renders[j][0])
                    dev = np.hypot(*(renders[i][1] - renders[j][1]).T).max()
                    assert dev < 0.05 * 128, (master, idx, i, j, dev)


def test_distinct_identities_have_distinct_parameters():
    a = make_identity(7, 0)
    b = make_identity(7, 1)
    assert a.vector.shape == b.vector.shape
    assert np.linalg.norm(a.vector - b.vector) > 0


def test_render_output_contract():
    ident = make_identity(5, 0)
    for size in (64, 128):
        img, lms = render_synthetic_face(ident, 0, size)
        assert img.shape == (size, size, 3)
        assert img.min() >= -1.0 and img.max() <= 1.0
        assert lms.shape == (68, 2)
        assert (lms >= 0).all() and (lms < size).all()


def test_landmarks_scale_with_size():
    ident = make_identity(5, 1)
    _, l64 = render_synthetic_face(ident, 1, 64)
    _, l128 = render_synthetic_face(ident, 1, 128)
    assert np.abs(l128 / 2.0 - l64).max() < 1e-9


def test_identity_images_differ_between_identities():
    img_a, _ = render_synthetic_face(make_identity(3, 0), 0, 64)
    img_b, _ = render_synthetic_face(make_identity(3, 1), 0, 64)
    assert np.abs(img_a - img_b).mean() > 0.01
