import importlib

import numpy as np
import pytest

from demorph.kernels import reference


def _native_or_skip():
    try:
        return importlib.import_module("demorph.kernels._native")
    except ImportError:
        pytest.skip("compiled kernels not built")


@pytest.fixture
def native():
    return _native_or_skip()


def test_im2col_matches_reference(native):
    rng = np.random.default_rng(0)
    for kh, kw, stride in ((3, 3, 1), (3, 3, 2), (7, 7, 1), (1, 1, 1)):
        x = rng.standard_normal((2, 18, 18, 5))
        a = reference.im2col(x, kh, kw, stride)
        b = native.im2col(x, kh, kw, stride)
        assert a.shape == b.shape
        assert np.array_equal(a, b)


def test_im2col_row_layout():
    # row [n, oy, ox] must hold the patch raveled in (kh, kw, c) order
    x = np.arange(2 * 4 * 4 * 2, dtype=np.float64).reshape(2, 4, 4, 2)
    cols = reference.im2col(x, 3, 3, 1)
    patch = x[1, 1:4, 0:3, :].reshape(-1)
    row = (1 * 2 + 1) * 2 + 0  # n=1, oy=1, ox=0 with oh=ow=2
    assert np.array_equal(cols[row], patch)


def test_col2im_matches_reference(native):
    rng = np.random.default_rng(1)
    for kh, kw, stride in ((3, 3, 1), (3, 3, 2), (7, 7, 1)):
        n, hp, wp, c = 2, 17, 17, 4
        oh = (hp - kh) // stride + 1
        ow = (wp - kw) // stride + 1
        cols = rng.standard_normal((n * oh * ow, kh * kw * c))
        a = reference.col2im(cols, n, hp, wp, c, kh, kw, stride)
        b = native.col2im(cols, n, hp, wp, c, kh, kw, stride)
        assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_col2im_is_im2col_adjoint():
    # <im2col(x), y> == <x, col2im(y)> characterizes the adjoint
    rng = np.random.default_rng(2)
    x = rng.standard_normal((1, 10, 10, 3))
    kh = kw = 3
    stride = 2
    cols = reference.im2col(x, kh, kw, stride)
    y = rng.standard_normal(cols.shape)
    lhs = float((cols * y).sum())
    back = reference.col2im(y, 1, 10, 10, 3, kh, kw, stride)
    rhs = float((x * back).sum())
    assert abs(lhs - rhs) < 1e-9


def test_warp_triangles_matches_reference(native):
    rng = np.random.default_rng(3)
    src = rng.uniform(-1, 1, (40, 40, 3))
    tri_src = np.array([[[2.0, 2.0], [30.0, 5.0], [8.0, 35.0]],
                        [[5.0, 5.0], [35.0, 30.0], [10.0, 38.0]]])
    tri_dst = tri_src + rng.uniform(-3, 3, tri_src.shape)
    out_a = src.copy()
    out_b = src.copy()
    sk_a = reference.warp_triangles(src, tri_src, tri_dst, out_a)
    sk_b = native.warp_triangles(src, tri_src, tri_dst, out_b)
    assert sk_a == sk_b == 0
    assert np.array_equal(out_a, out_b)


def test_warp_triangles_skips_degenerate(native):
    src = np.zeros((10, 10, 3))
    tri = np.array([[[1.0, 1.0], [5.0, 1.0], [3.0, 1.0]]])
    out = src.copy()
    assert native.warp_triangles(src, tri, tri, out) == 1
    out = src.copy()
    assert reference.warp_triangles(src, tri, tri, out) == 1


def test_warp_affine_matches_reference(native):
    rng = np.random.default_rng(4)
    src = rng.uniform(-1, 1, (32, 32, 3))
    inv_m = np.array([[0.9, 0.1, 1.5], [-0.05, 1.1, -2.0]])
    a = reference.warp_affine(src, inv_m, 24, 28)
    b = native.warp_affine(src, inv_m, 24, 28)
    assert a.shape == b.shape == (24, 28, 3)
    assert np.array_equal(a, b)


def test_warp_affine_identity():
    rng = np.random.default_rng(5)
    src = rng.uniform(-1, 1, (16, 16, 3))
    ident = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert np.array_equal(reference.warp_affine(src, ident, 16, 16), src)


def test_backend_selection_env(monkeypatch):
    import demorph.kernels as K

    monkeypatch.setenv("DEMORPH_KERNELS", "python")
    impl = K._load()
    assert impl.BACKEND == "python"
    monkeypatch.setenv("DEMORPH_KERNELS", "bogus")
    with pytest.raises(ValueError):
        K._load()
