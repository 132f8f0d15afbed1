# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: conv patch gather/scatter and bilinear warping.

Same arithmetic as demorph.kernels.reference; see that module for the
contract docstrings. Compiled without -ffast-math so float64 results track
the reference implementation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor

BACKEND = "native"


def im2col(cnp.ndarray[cnp.float64_t, ndim=4] xp, int kh, int kw, int stride):
    cdef Py_ssize_t n = xp.shape[0]
    cdef Py_ssize_t hp = xp.shape[1]
    cdef Py_ssize_t wp = xp.shape[2]
    cdef Py_ssize_t c = xp.shape[3]
    cdef Py_ssize_t oh = (hp - kh) // stride + 1
    cdef Py_ssize_t ow = (wp - kw) // stride + 1
    out = np.empty((n * oh * ow, kh * kw * c), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(xp)
    cdef Py_ssize_t b, oy, ox, i, j, ch, row, col
    for b in range(n):
        for oy in range(oh):
            for ox in range(ow):
                row = (b * oh + oy) * ow + ox
                col = 0
                for i in range(kh):
                    for j in range(kw):
                        for ch in range(c):
                            o[row, col] = x[b, oy * stride + i, ox * stride + j, ch]
                            col += 1
    return out


def col2im(cnp.ndarray[cnp.float64_t, ndim=2] cols, int n, int hp, int wp, int c,
           int kh, int kw, int stride):
    cdef Py_ssize_t oh = (hp - kh) // stride + 1
    cdef Py_ssize_t ow = (wp - kw) // stride + 1
    out = np.zeros((n, hp, wp, c), dtype=np.float64)
    cdef double[:, :, :, ::1] o = out
    cdef double[:, ::1] src = np.ascontiguousarray(cols)
    cdef Py_ssize_t b, oy, ox, i, j, ch, row, col
    for b in range(n):
        for oy in range(oh):
            for ox in range(ow):
                row = (b * oh + oy) * ow + ox
                col = 0
                for i in range(kh):
                    for j in range(kw):
                        for ch in range(c):
                            o[b, oy * stride + i, ox * stride + j, ch] += src[row, col]
                            col += 1
    return out


cdef inline double _clampd(double v, double lo, double hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def warp_triangles(cnp.ndarray[cnp.float64_t, ndim=3] src,
                   cnp.ndarray[cnp.float64_t, ndim=3] tri_src,
                   cnp.ndarray[cnp.float64_t, ndim=3] tri_dst,
                   cnp.ndarray[cnp.float64_t, ndim=3] out,
                   double min_area=1e-9, double edge_eps=1e-9):
    cdef Py_ssize_t h = out.shape[0]
    cdef Py_ssize_t w = out.shape[1]
    cdef Py_ssize_t c = out.shape[2]
    cdef Py_ssize_t sh = src.shape[0]
    cdef Py_ssize_t sw = src.shape[1]
    cdef double[:, :, ::1] s = np.ascontiguousarray(src)
    cdef double[:, :, ::1] o = out
    cdef double[:, :, ::1] td = np.ascontiguousarray(tri_dst)
    cdef double[:, :, ::1] ts = np.ascontiguousarray(tri_src)
    cdef Py_ssize_t ntri = tri_dst.shape[0]
    cdef Py_ssize_t t, px, py, ch, x_lo, x_hi, y_lo, y_hi, x0, y0, x1, y1
    cdef double d0x, d0y, d1x, d1y, d2x, d2y, area2, det
    cdef double p00, p01, p10, p11, q00, q01, q10, q11
    cdef double a00, a01, a10, a11, b0, b1
    cdef double l1, l2, sx, sy, fx, fy, gx, gy
    cdef double minx, maxx, miny, maxy
    cdef int skipped = 0
    for t in range(ntri):
        d0x = td[t, 0, 0]; d0y = td[t, 0, 1]
        d1x = td[t, 1, 0]; d1y = td[t, 1, 1]
        d2x = td[t, 2, 0]; d2y = td[t, 2, 1]
        area2 = (d1x - d0x) * (d2y - d0y) - (d2x - d0x) * (d1y - d0y)
        if (area2 if area2 >= 0 else -area2) * 0.5 < min_area:
            skipped += 1
            continue
        # destination->source affine from the three vertex correspondences
        p00 = d1x - d0x; p01 = d2x - d0x
        p10 = d1y - d0y; p11 = d2y - d0y
        q00 = ts[t, 1, 0] - ts[t, 0, 0]; q01 = ts[t, 2, 0] - ts[t, 0, 0]
        q10 = ts[t, 1, 1] - ts[t, 0, 1]; q11 = ts[t, 2, 1] - ts[t, 0, 1]
        det = p00 * p11 - p01 * p10
        a00 = (q00 * p11 - q01 * p10) / det
        a01 = (q01 * p00 - q00 * p01) / det
        a10 = (q10 * p11 - q11 * p10) / det
        a11 = (q11 * p00 - q10 * p01) / det
        b0 = ts[t, 0, 0] - (a00 * d0x + a01 * d0y)
        b1 = ts[t, 0, 1] - (a10 * d0x + a11 * d0y)
        minx = d0x if d0x < d1x else d1x
        minx = minx if minx < d2x else d2x
        maxx = d0x if d0x > d1x else d1x
        maxx = maxx if maxx > d2x else d2x
        miny = d0y if d0y < d1y else d1y
        miny = miny if miny < d2y else d2y
        maxy = d0y if d0y > d1y else d1y
        maxy = maxy if maxy > d2y else d2y
        x_lo = <Py_ssize_t>ceil(minx)
        if x_lo < 0:
            x_lo = 0
        x_hi = <Py_ssize_t>floor(maxx)
        if x_hi > w - 1:
            x_hi = w - 1
        y_lo = <Py_ssize_t>ceil(miny)
        if y_lo < 0:
            y_lo = 0
        y_hi = <Py_ssize_t>floor(maxy)
        if y_hi > h - 1:
            y_hi = h - 1
        for py in range(y_lo, y_hi + 1):
            gy = <double>py
            for px in range(x_lo, x_hi + 1):
                gx = <double>px
                l1 = ((gx - d0x) * (d2y - d0y) - (d2x - d0x) * (gy - d0y)) / area2
                l2 = ((d1x - d0x) * (gy - d0y) - (gx - d0x) * (d1y - d0y)) / area2
                if l1 >= -edge_eps and l2 >= -edge_eps and l1 + l2 <= 1.0 + edge_eps:
                    sx = a00 * gx + a01 * gy + b0
                    sy = a10 * gx + a11 * gy + b1
                    sx = _clampd(sx, 0.0, sw - 1.0)
                    sy = _clampd(sy, 0.0, sh - 1.0)
                    x0 = <Py_ssize_t>floor(sx)
                    y0 = <Py_ssize_t>floor(sy)
                    x1 = x0 + 1
                    if x1 > sw - 1:
                        x1 = sw - 1
                    y1 = y0 + 1
                    if y1 > sh - 1:
                        y1 = sh - 1
                    fx = sx - <double>x0
                    fy = sy - <double>y0
                    for ch in range(c):
                        o[py, px, ch] = (
                            (s[y0, x0, ch] * (1.0 - fx) + s[y0, x1, ch] * fx) * (1.0 - fy)
                            + (s[y1, x0, ch] * (1.0 - fx) + s[y1, x1, ch] * fx) * fy
                        )
    return skipped


def warp_affine(cnp.ndarray[cnp.float64_t, ndim=3] src,
                cnp.ndarray[cnp.float64_t, ndim=2] inv_m,
                int out_h, int out_w):
    cdef Py_ssize_t sh = src.shape[0]
    cdef Py_ssize_t sw = src.shape[1]
    cdef Py_ssize_t c = src.shape[2]
    out = np.empty((out_h, out_w, c), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef double[:, :, ::1] s = np.ascontiguousarray(src)
    cdef double m00 = inv_m[0, 0], m01 = inv_m[0, 1], m02 = inv_m[0, 2]
    cdef double m10 = inv_m[1, 0], m11 = inv_m[1, 1], m12 = inv_m[1, 2]
    cdef Py_ssize_t px, py, ch, x0, y0, x1, y1
    cdef double sx, sy, fx, fy
    for py in range(out_h):
        for px in range(out_w):
            sx = m00 * px + m01 * py + m02
            sy = m10 * px + m11 * py + m12
            sx = _clampd(sx, 0.0, sw - 1.0)
            sy = _clampd(sy, 0.0, sh - 1.0)
            x0 = <Py_ssize_t>floor(sx)
            y0 = <Py_ssize_t>floor(sy)
            x1 = x0 + 1
            if x1 > sw - 1:
                x1 = sw - 1
            y1 = y0 + 1
            if y1 > sh - 1:
                y1 = sh - 1
            fx = sx - <double>x0
            fy = sy - <double>y0
            for ch in range(c):
                o[py, px, ch] = (
                    (s[y0, x0, ch] * (1.0 - fx) + s[y0, x1, ch] * fx) * (1.0 - fy)
                    + (s[y1, x0, ch] * (1.0 - fx) + s[y1, x1, ch] * fx) * fy
                )
    return out
