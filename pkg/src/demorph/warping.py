"""Image warping: per-triangle affine morph warps and 5-point alignment.

All warps use inverse mapping with bilinear sampling (forward mapping
leaves holes). Bilinear samples are convex combinations of source pixels,
so warped images stay inside the source value range.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateGeometryError, ParameterError, ShapeError
from .image_io import validate_image
from .landmarks import as_landmarks, check_compatible, interpolate_landmarks
from .triangulation import triangulate

# Canonical 5-point template in a 128x128 frame: eye centers on the 40%
# height line, 50 px apart; nose tip at 60% height; mouth corners 36 px
# apart at 77% height. Templates for other output sizes scale uniformly.
CANONICAL_TEMPLATE_SIZE = 128
CANONICAL_FIVE_POINTS = np.array(
    [
        [39.0, 51.2],
        [89.0, 51.2],
        [64.0, 76.8],
        [46.0, 98.56],
        [82.0, 98.56],
    ]
)


@dataclass
class WarpResult:
    """Warped image plus the count of degenerate triangles skipped."""

    image: np.ndarray
    skipped_triangles: int


def blend(i1, i2, alpha):
    """Per-pixel blend (1 - alpha) * i1 + alpha * i2."""
    i1 = validate_image(i1, "i1")
    i2 = validate_image(i2, "i2")
    if i1.shape != i2.shape:
        raise ShapeError(f"blend inputs differ in shape: {i1.shape} vs {i2.shape}")
    if not np.isfinite(alpha) or not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"pixel fusion factor must be in [0, 1], got {alpha}")
    return (1.0 - alpha) * i1 + alpha * i2


def warp_image(src, k_src, k_dst, mesh):
    """Piecewise-affine warp of src so k_src moves onto k_dst.

    Each mesh triangle over k_dst is filled by inverse-mapping into the
    corresponding k_src triangle. Pixels outside every destination
    triangle pass through from src unchanged.
    """
    src = validate_image(src, "src")
    k_src = as_landmarks(k_src, "k_src")
    k_dst = as_landmarks(k_dst, "k_dst")
    check_compatible(k_src, k_dst)
    mesh = np.asarray(mesh, dtype=np.intp)
    if mesh.ndim != 2 or mesh.shape[1] != 3:
        raise ShapeError(f"mesh must be (m, 3), got {mesh.shape}")
    if mesh.size and mesh.max() >= k_src.shape[0]:
        raise ShapeError("mesh indexes beyond the landmark count")
    tri_src = np.ascontiguousarray(k_src[mesh])
    tri_dst = np.ascontiguousarray(k_dst[mesh])
    out = src.copy()
    skipped = kernels.warp_triangles(src, tri_src, tri_dst, out)
    return WarpResult(out, int(skipped))


@dataclass
class MorphParams:
    """alpha: pixel fusion factor; beta: location fusion factor."""

    alpha: float
    beta: float

    def validate(self):
        for name, v in (("alpha", self.alpha), ("beta", self.beta)):
            if not np.isfinite(v) or not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1], got {v}")


def morph(i1, k1, i2, k2, params):
    """Generate a morphed image from two contributors.

    Interpolates the two 85-point sets, triangulates the interpolated set,
    warps both contributors onto it, and blends pixelwise.
    """
    if isinstance(params, tuple):
        params = MorphParams(*params)
    params.validate()
    i1 = validate_image(i1, "i1")
    i2 = validate_image(i2, "i2")
    if i1.shape != i2.shape:
        raise ShapeError(f"contributor images differ in shape: {i1.shape} vs {i2.shape}")
    mid = interpolate_landmarks(k1, k2, params.beta)
    mesh = triangulate(mid)
    w1 = warp_image(i1, k1, mid, mesh).image
    w2 = warp_image(i2, k2, mid, mesh).image
    return blend(w1, w2, params.alpha)


def similarity_fit(src_pts, dst_pts):
    """Least-squares similarity transform mapping src points onto dst points.

    Closed-form fit (SVD of the point covariance, reflection excluded).
    Returns (matrix, scale) where matrix is the 2x3 [s*R | t].
    """
    src = as_landmarks(src_pts, "src_pts")
    dst = as_landmarks(dst_pts, "dst_pts")
    check_compatible(src, dst)
    n = src.shape[0]
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    sc = src - mu_s
    dc = dst - mu_d
    cov = dc.T @ sc / n
    u, d, vt = np.linalg.svd(cov)
    var_s = (sc * sc).sum() / n
    if var_s <= 0 or d[0] <= 0 or d[1] < 1e-9 * d[0]:
        raise DegenerateGeometryError("landmark configuration is degenerate (collinear)")
    sign = np.sign(np.linalg.det(u @ vt))
    s_fix = np.array([1.0, sign])
    rot = u @ np.diag(s_fix) @ vt
    scale = float((d * s_fix).sum() / var_s)
    m = np.empty((2, 3))
    m[:, :2] = scale * rot
    m[:, 2] = mu_d - scale * rot @ mu_s
    return m, scale


def invert_affine(m):
    """Inverse of a 2x3 affine matrix."""
    a = m[:, :2]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(det) < 1e-15:
        raise DegenerateGeometryError("affine matrix is singular")
    inv = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det
    out = np.empty((2, 3))
    out[:, :2] = inv
    out[:, 2] = -inv @ m[:, 2]
    return out


def apply_affine(m, points):
    """Apply a 2x3 affine matrix to an (n, 2) point array."""
    pts = as_landmarks(points)
    return pts @ m[:, :2].T + m[:, 2]


def canonical_five_points(out_size=CANONICAL_TEMPLATE_SIZE):
    return CANONICAL_FIVE_POINTS * (out_size / CANONICAL_TEMPLATE_SIZE)


def align_face(img, five_points, out_size=CANONICAL_TEMPLATE_SIZE):
    """Align a face to the canonical 5-point template.

    Fits the similarity transform from the given 5 landmarks (eye centers,
    nose tip, mouth corners) to the canonical template and resamples the
    image into an out_size x out_size frame. Returns (aligned, matrix) so
    callers can carry other landmarks through the same transform.
    """
    img = validate_image(img)
    pts = as_landmarks(five_points, "five_points")
    if pts.shape[0] != 5:
        raise ShapeError(f"expected 5 alignment landmarks, got {pts.shape[0]}")
    template = canonical_five_points(out_size)
    m, _ = similarity_fit(pts, template)
    aligned = kernels.warp_affine(img, invert_affine(m), out_size, out_size)
    return aligned, m
