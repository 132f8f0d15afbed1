"""Pure NumPy implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable and
the numerical reference the extension is tested against. Both backends
implement the same per-element arithmetic so results agree to float64
round-off (warping is bit-identical; col2im may differ only in summation
order of overlapping patches).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND = "python"


def im2col(xp, kh, kw, stride):
    """Gather conv patches from a padded NHWC batch.

    xp: (n, hp, wp, c) float64. Returns (n*oh*ow, kh*kw*c) where row
    [n, oy, ox] holds the patch at (oy*stride, ox*stride) raveled in
    (kh, kw, c) order.
    """
    n, hp, wp, c = xp.shape
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    win = win[:, :: stride, :: stride]
    cols = win.transpose(0, 1, 2, 4, 5, 3)
    return np.ascontiguousarray(cols.reshape(n * oh * ow, kh * kw * c))


def col2im(cols, n, hp, wp, c, kh, kw, stride):
    """Scatter-add conv patches back onto a padded NHWC batch (im2col adjoint)."""
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    cols6 = cols.reshape(n, oh, ow, kh, kw, c)
    out = np.zeros((n, hp, wp, c), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, i : i + oh * stride : stride, j : j + ow * stride : stride, :] += cols6[
                :, :, :, i, j, :
            ]
    return out


def _inverse_affine(tri_dst, tri_src):
    """2x3 matrix mapping destination-triangle coords to source coords.

    Uses the explicit 2x2 adjugate so the arithmetic matches the compiled
    kernel exactly.
    """
    d = tri_dst
    s = tri_src
    p00 = d[1, 0] - d[0, 0]
    p01 = d[2, 0] - d[0, 0]
    p10 = d[1, 1] - d[0, 1]
    p11 = d[2, 1] - d[0, 1]
    q00 = s[1, 0] - s[0, 0]
    q01 = s[2, 0] - s[0, 0]
    q10 = s[1, 1] - s[0, 1]
    q11 = s[2, 1] - s[0, 1]
    det = p00 * p11 - p01 * p10
    m = np.empty((2, 3))
    m[0, 0] = (q00 * p11 - q01 * p10) / det
    m[0, 1] = (q01 * p00 - q00 * p01) / det
    m[1, 0] = (q10 * p11 - q11 * p10) / det
    m[1, 1] = (q11 * p00 - q10 * p01) / det
    m[0, 2] = s[0, 0] - (m[0, 0] * d[0, 0] + m[0, 1] * d[0, 1])
    m[1, 2] = s[0, 1] - (m[1, 0] * d[0, 0] + m[1, 1] * d[0, 1])
    return m


def _bilinear(src, sx, sy):
    """Sample src (h, w, c) at float coords with clamp-to-edge. sx/sy arrays."""
    h, w = src.shape[:2]
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    v00 = src[y0, x0]
    v01 = src[y0, x1]
    v10 = src[y1, x0]
    v11 = src[y1, x1]
    return (v00 * (1.0 - fx) + v01 * fx) * (1.0 - fy) + (v10 * (1.0 - fx) + v11 * fx) * fy


def warp_triangles(src, tri_src, tri_dst, out, min_area=1e-9, edge_eps=1e-9):
    """Inverse-map each destination triangle onto `out`, sampling `src` bilinearly.

    src, out: (h, w, c) float64; out is written in place (pixels outside all
    triangles keep their existing values). tri_src/tri_dst: (t, 3, 2) vertex
    coords as (x, y). Triangles whose destination area falls below min_area
    are skipped; returns the skipped count.
    """
    h, w = out.shape[:2]
    skipped = 0
    for t in range(tri_dst.shape[0]):
        d = tri_dst[t]
        area2 = (d[1, 0] - d[0, 0]) * (d[2, 1] - d[0, 1]) - (d[2, 0] - d[0, 0]) * (
            d[1, 1] - d[0, 1]
        )
        if abs(area2) * 0.5 < min_area:
            skipped += 1
            continue
        m = _inverse_affine(d, tri_src[t])
        x_lo = max(int(np.ceil(d[:, 0].min())), 0)
        x_hi = min(int(np.floor(d[:, 0].max())), w - 1)
        y_lo = max(int(np.ceil(d[:, 1].min())), 0)
        y_hi = min(int(np.floor(d[:, 1].max())), h - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        xs = np.arange(x_lo, x_hi + 1, dtype=np.float64)
        ys = np.arange(y_lo, y_hi + 1, dtype=np.float64)
        gx, gy = np.meshgrid(xs, ys)
        # normalized barycentric coords relative to d0
        l1 = ((gx - d[0, 0]) * (d[2, 1] - d[0, 1]) - (d[2, 0] - d[0, 0]) * (gy - d[0, 1])) / area2
        l2 = ((d[1, 0] - d[0, 0]) * (gy - d[0, 1]) - (gx - d[0, 0]) * (d[1, 1] - d[0, 1])) / area2
        inside = (l1 >= -edge_eps) & (l2 >= -edge_eps) & (l1 + l2 <= 1.0 + edge_eps)
        if not inside.any():
            continue
        px = gx[inside]
        py = gy[inside]
        sx = m[0, 0] * px + m[0, 1] * py + m[0, 2]
        sy = m[1, 0] * px + m[1, 1] * py + m[1, 2]
        out[py.astype(np.intp), px.astype(np.intp)] = _bilinear(src, sx, sy)
    return skipped


def warp_affine(src, inv_m, out_h, out_w):
    """Apply a global affine warp by inverse mapping with bilinear sampling.

    inv_m: 2x3 matrix sending output pixel coords (x, y) to source coords.
    Out-of-range samples clamp to the source edge.
    """
    xs = np.arange(out_w, dtype=np.float64)
    ys = np.arange(out_h, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    sx = inv_m[0, 0] * gx + inv_m[0, 1] * gy + inv_m[0, 2]
    sy = inv_m[1, 0] * gx + inv_m[1, 1] * gy + inv_m[1, 2]
    return _bilinear(src, sx, sy)
