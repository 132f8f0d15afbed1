"""Landmark set handling: interpolation, border augmentation, file IO.

A landmark set is an (n, 2) float64 array of (x, y) pixel coordinates with
a fixed point order, so index i corresponds across sets. The morph
pipeline consumes the standard 68-point facial annotation, drops the three
points on the lower contour of the upper lip (morphing them produces
fold-over artifacts), and appends 20 border points, giving 85 points.
"""

import json

import numpy as np

from .errors import IncompatibleLandmarksError, ParameterError

# Indices of the upper lip's lower contour in the standard 68-point order
# (inner-mouth points 61..63). Removed before morphing.
UPPER_LIP_LOWER_CONTOUR = (61, 62, 63)

FACIAL_POINT_COUNT = 65
BORDER_POINT_COUNT = 20
MORPH_POINT_COUNT = FACIAL_POINT_COUNT + BORDER_POINT_COUNT

# 68-point layout: eye rings and mouth corners used for the 5-point subset.
LEFT_EYE_RING = tuple(range(36, 42))
RIGHT_EYE_RING = tuple(range(42, 48))
NOSE_TIP = 30
MOUTH_CORNERS = (48, 54)


def as_landmarks(points, name="landmarks"):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise IncompatibleLandmarksError(f"{name} must be (n, 2), got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise IncompatibleLandmarksError(f"{name} contains non-finite coordinates")
    return pts


def check_compatible(k1, k2):
    if k1.shape[0] != k2.shape[0]:
        raise IncompatibleLandmarksError(
            f"landmark counts differ: {k1.shape[0]} vs {k2.shape[0]}"
        )


def interpolate_landmarks(k1, k2, beta):
    """Blend point locations: (1 - beta) * k1 + beta * k2."""
    k1 = as_landmarks(k1, "k1")
    k2 = as_landmarks(k2, "k2")
    check_compatible(k1, k2)
    if not np.isfinite(beta) or not 0.0 <= beta <= 1.0:
        raise ParameterError(f"location fusion factor must be in [0, 1], got {beta}")
    return (1.0 - beta) * k1 + beta * k2


def prune_upper_lip(k68):
    """68 facial points -> the 65 used for morphing."""
    k68 = as_landmarks(k68, "k68")
    if k68.shape[0] != 68:
        raise IncompatibleLandmarksError(f"expected 68 points, got {k68.shape[0]}")
    keep = [i for i in range(68) if i not in UPPER_LIP_LOWER_CONTOUR]
    return k68[keep]


def border_landmarks(w, h):
    """The 20 border points: 4 corners plus 4 evenly spaced points per edge.

    Order is fixed: corners (clockwise from origin), then top, right,
    bottom, left edge interiors at 1/5 spacing. Coordinates use the pixel
    index range [0, w-1] x [0, h-1].
    """
    xr = w - 1.0
    yb = h - 1.0
    pts = [(0.0, 0.0), (xr, 0.0), (xr, yb), (0.0, yb)]
    frac = [i / 5.0 for i in range(1, 5)]
    pts += [(f * xr, 0.0) for f in frac]
    pts += [(xr, f * yb) for f in frac]
    pts += [(f * xr, yb) for f in frac]
    pts += [(0.0, f * yb) for f in frac]
    return np.array(pts, dtype=np.float64)


def augment_border_landmarks(facial, w, h):
    """Append the 20 border points to a 65-point facial set -> 85 points."""
    facial = as_landmarks(facial, "facial")
    if facial.shape[0] != FACIAL_POINT_COUNT:
        raise IncompatibleLandmarksError(
            f"expected {FACIAL_POINT_COUNT} facial points, got {facial.shape[0]}"
        )
    return np.vstack([facial, border_landmarks(w, h)])


def morph_landmarks_from_68(k68, w, h):
    """68-point annotation -> the 85-point morph set."""
    return augment_border_landmarks(prune_upper_lip(k68), w, h)


def five_point_subset(k68):
    """Eye centers, nose tip and mouth corners from a 68-point set."""
    k68 = as_landmarks(k68, "k68")
    if k68.shape[0] != 68:
        raise IncompatibleLandmarksError(f"expected 68 points, got {k68.shape[0]}")
    left_eye = k68[list(LEFT_EYE_RING)].mean(axis=0)
    right_eye = k68[list(RIGHT_EYE_RING)].mean(axis=0)
    return np.array(
        [left_eye, right_eye, k68[NOSE_TIP], k68[MOUTH_CORNERS[0]], k68[MOUTH_CORNERS[1]]]
    )


def load_landmarks(path):
    """Read a landmark JSON file: a top-level array of [x, y] pairs."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return as_landmarks(np.array(data, dtype=np.float64), str(path))


def save_landmarks(path, points):
    pts = as_landmarks(points)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([[float(x), float(y)] for x, y in pts], fh)
