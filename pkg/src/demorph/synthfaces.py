"""Procedural toy-face rendering with consistent 68-point landmarks.

Faces are parametric: an identity is a seed-derived vector of geometry and
color parameters (face oval, eyes, brows, nose, mouth, skin/hair tones);
a variation applies a small pose jitter (similarity transform about the
frame center), expression jitter (mouth opening, brow raise, gaze) and a
brightness jitter. Landmarks are computed from the same parameters that
drive the drawing, so they sit on the rendered features by construction.

Geometry is defined in a canonical 128x128 frame and scaled to the
requested output size. Jitter bounds keep any landmark within 5% of the
image width of its position in any other variation of the same identity.
"""

from dataclasses import dataclass

import numpy as np

CANONICAL_SIZE = 128
FACE_CENTER = (64.0, 66.0)

# pose jitter bounds (canonical-frame units)
MAX_ROTATION_DEG = 1.2
MAX_LOG_SCALE = 0.012
MAX_TRANSLATION = 1.0
MAX_BROW_RAISE = 0.8
MAX_MOUTH_SHIFT = 0.8
MAX_MOUTH_OPEN = 1.5
MAX_GAZE = 0.8
MAX_BRIGHTNESS = 0.04


@dataclass(frozen=True)
class SyntheticIdentity:
    master_seed: int
    index: int
    params: dict

    @property
    def vector(self):
        """Flat parameter vector (fixed key order) for distinctness checks."""
        vals = []
        for k in sorted(self.params):
            v = self.params[k]
            vals.extend(np.atleast_1d(v).astype(np.float64).ravel())
        return np.array(vals)


def _color(rng, lo, hi):
    return lo + (hi - lo) * rng.random(3)


def make_identity(master_seed, index):
    """Sample one identity's parameter set deterministically."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=(1, index)))
    u = rng.uniform
    skin_r = u(0.62, 0.92)
    skin = np.array([skin_r, skin_r * u(0.72, 0.84), skin_r * u(0.55, 0.72)])
    p = {
        "face_rx": u(36.0, 44.0),
        "face_ry": u(46.0, 54.0),
        "skin": skin,
        "background": _color(rng, 0.08, 0.45),
        "hair": _color(rng, 0.05, 0.55),
        "hair_ry": u(0.56, 0.72),
        "eye_y": u(50.0, 56.0),
        "eye_dx": u(17.0, 22.0),
        "eye_rx": u(5.5, 7.5),
        "eye_ry_ratio": u(0.5, 0.68),
        "iris_ratio": u(0.38, 0.55),
        "iris": _color(rng, 0.05, 0.6),
        "brow_dy": u(8.0, 12.0),
        "brow_th": u(1.6, 2.8),
        "brow_len_ratio": u(1.5, 2.0),
        "brow_arch": u(0.5, 2.0),
        "brow_color": _color(rng, 0.03, 0.35),
        "nose_len": u(15.0, 20.0),
        "nose_w": u(5.5, 8.5),
        "nose_shade": u(0.78, 0.92),
        "mouth_dy": u(10.0, 14.0),
        "mouth_w": u(11.0, 16.0),
        "lip_th": u(2.6, 4.6),
        "lip": np.array([u(0.55, 0.85), u(0.2, 0.4), u(0.2, 0.4)]),
    }
    return SyntheticIdentity(master_seed, index, p)


def _variation_jitter(identity, variation):
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=identity.master_seed, spawn_key=(2, identity.index, variation))
    )
    u = rng.uniform
    return {
        "rot": np.deg2rad(u(-MAX_ROTATION_DEG, MAX_ROTATION_DEG)),
        "scale": float(np.exp(u(-MAX_LOG_SCALE, MAX_LOG_SCALE))),
        "tx": u(-MAX_TRANSLATION, MAX_TRANSLATION),
        "ty": u(-MAX_TRANSLATION, MAX_TRANSLATION),
        "brow_raise": u(-MAX_BROW_RAISE, MAX_BROW_RAISE),
        "mouth_shift": u(-MAX_MOUTH_SHIFT, MAX_MOUTH_SHIFT),
        "mouth_open": u(0.0, MAX_MOUTH_OPEN),
        "gaze_x": u(-MAX_GAZE, MAX_GAZE),
        "gaze_y": u(-MAX_GAZE * 0.5, MAX_GAZE * 0.5),
        "brightness": u(-MAX_BRIGHTNESS, MAX_BRIGHTNESS),
    }


def _jitter_matrix(j):
    """Canonical -> jittered-canonical similarity about the frame center."""
    c, s = np.cos(j["rot"]), np.sin(j["rot"])
    a = j["scale"] * np.array([[c, -s], [s, c]])
    cx, cy = CANONICAL_SIZE / 2.0, CANONICAL_SIZE / 2.0
    t = np.array([cx + j["tx"], cy + j["ty"]]) - a @ np.array([cx, cy])
    m = np.empty((2, 3))
    m[:, :2] = a
    m[:, 2] = t
    return m


def _ellipse_alpha(xc, yc, cx, cy, rx, ry, soft=1.0):
    d = ((xc - cx) / rx) ** 2 + ((yc - cy) / ry) ** 2
    edge = min(rx, ry) / (2.0 * soft)
    return np.clip((1.0 - d) * edge, 0.0, 1.0)


def _capsule_alpha(xc, yc, x1, y1, x2, y2, radius, soft=1.0):
    vx, vy = x2 - x1, y2 - y1
    denom = vx * vx + vy * vy
    if denom == 0.0:
        t = 0.0
    else:
        t = np.clip(((xc - x1) * vx + (yc - y1) * vy) / denom, 0.0, 1.0)
    dist = np.hypot(xc - (x1 + t * vx), yc - (y1 + t * vy))
    return np.clip((radius - dist) / soft, 0.0, 1.0)


def _over(img, color, alpha):
    img *= 1.0 - alpha[..., None]
    img += alpha[..., None] * np.asarray(color)[None, None, :]


def _landmarks_canonical(p, j):
    """68 points in the canonical frame, expression jitter applied."""
    cx, cy = FACE_CENTER
    eye_y = p["eye_y"]
    pts = np.zeros((68, 2))

    # 0-16 jaw along the lower face oval
    for i in range(17):
        phi = np.deg2rad(190.0 - i * 12.5)
        pts[i] = (cx + p["face_rx"] * np.cos(phi), cy + p["face_ry"] * np.sin(phi))

    # 17-26 brows (5 points each, arched, outer-to-inner then inner-to-outer)
    brow_y = eye_y - p["brow_dy"] - j["brow_raise"]
    half = p["brow_len_ratio"] * p["eye_rx"]
    for side, base in ((-1, 17), (1, 22)):
        ex = cx + side * p["eye_dx"]
        xs = np.linspace(ex - half, ex + half, 5)
        for k in range(5):
            arch = p["brow_arch"] * np.sin(np.pi * k / 4.0)
            pts[base + k] = (xs[k], brow_y - arch)

    # 27-30 nose bridge, 31-35 nostril row
    tip_y = eye_y + p["nose_len"]
    for k in range(4):
        pts[27 + k] = (cx, eye_y + 1.0 + (tip_y - eye_y - 1.0) * (k + 1) / 4.0)
    for k, f in enumerate((-1.0, -0.5, 0.0, 0.5, 1.0)):
        pts[31 + k] = (cx + f * p["nose_w"], tip_y + 1.5)

    # 36-47 eye hexagons (outer corner first on the left eye, inner on the right)
    eye_ry = p["eye_rx"] * p["eye_ry_ratio"]
    angles = (180.0, 135.0, 45.0, 0.0, 315.0, 225.0)
    for side, base in ((-1, 36), (1, 42)):
        ex = cx + side * p["eye_dx"]
        for k, ang in enumerate(angles):
            a = np.deg2rad(ang)
            pts[base + k] = (ex + p["eye_rx"] * np.cos(a), eye_y - eye_ry * np.sin(a))

    # 48-67 mouth: 12-point outer ring, 8-point inner ring
    mouth_y = tip_y + p["mouth_dy"] + j["mouth_shift"]
    out_ry = p["lip_th"] + j["mouth_open"] / 2.0
    outer = (180.0, 150.0, 120.0, 90.0, 60.0, 30.0, 0.0, 330.0, 300.0, 270.0, 240.0, 210.0)
    for k, ang in enumerate(outer):
        a = np.deg2rad(ang)
        pts[48 + k] = (cx + p["mouth_w"] * np.cos(a), mouth_y - out_ry * np.sin(a))
    in_ry = max(0.6, 0.8 * j["mouth_open"])
    inner = (180.0, 120.0, 90.0, 60.0, 0.0, 300.0, 270.0, 240.0)
    for k, ang in enumerate(inner):
        a = np.deg2rad(ang)
        pts[60 + k] = (cx + 0.6 * p["mouth_w"] * np.cos(a), mouth_y - in_ry * np.sin(a))
    return pts


def _render_canonical(p, j, xc, yc):
    """Paint the face into a float [0, 1] image given canonical coord grids."""
    img = np.empty(xc.shape + (3,))
    img[:] = np.asarray(p["background"])[None, None, :]
    cx, cy = FACE_CENTER
    eye_y = p["eye_y"]
    skin = p["skin"]

    _over(img, p["hair"], _ellipse_alpha(xc, yc, cx, cy - p["face_ry"] * 0.5,
                                         p["face_rx"] * 1.04, p["face_ry"] * p["hair_ry"]))
    _over(img, skin, _ellipse_alpha(xc, yc, cx, cy, p["face_rx"], p["face_ry"]))

    # brows
    brow_y = eye_y - p["brow_dy"] - j["brow_raise"]
    half = p["brow_len_ratio"] * p["eye_rx"]
    for side in (-1, 1):
        ex = cx + side * p["eye_dx"]
        _over(img, p["brow_color"],
              _capsule_alpha(xc, yc, ex - half, brow_y, ex + half,
                             brow_y - p["brow_arch"] * 0.5, p["brow_th"]))

    # eyes: sclera, iris, pupil
    eye_ry = p["eye_rx"] * p["eye_ry_ratio"]
    sclera = np.array([0.93, 0.93, 0.9])
    for side in (-1, 1):
        ex = cx + side * p["eye_dx"]
        _over(img, sclera, _ellipse_alpha(xc, yc, ex, eye_y, p["eye_rx"], eye_ry))
        ix = ex + j["gaze_x"]
        iy = eye_y + j["gaze_y"]
        ir = p["iris_ratio"] * p["eye_rx"]
        _over(img, p["iris"], _ellipse_alpha(xc, yc, ix, iy, ir, ir))
        _over(img, np.array([0.02, 0.02, 0.02]),
              _ellipse_alpha(xc, yc, ix, iy, ir * 0.45, ir * 0.45))

    # nose: bridge stroke plus nostrils
    tip_y = eye_y + p["nose_len"]
    _over(img, skin * p["nose_shade"],
          _capsule_alpha(xc, yc, cx, eye_y + 2.0, cx, tip_y, p["nose_w"] * 0.35))
    for side in (-1, 1):
        _over(img, skin * 0.55,
              _ellipse_alpha(xc, yc, cx + side * p["nose_w"] * 0.7, tip_y + 0.5, 1.4, 1.0))

    # mouth: lips plus dark opening
    mouth_y = tip_y + p["mouth_dy"] + j["mouth_shift"]
    out_ry = p["lip_th"] + j["mouth_open"] / 2.0
    _over(img, p["lip"], _ellipse_alpha(xc, yc, cx, mouth_y, p["mouth_w"], out_ry))
    if j["mouth_open"] > 0.3:
        _over(img, np.array([0.08, 0.02, 0.02]),
              _ellipse_alpha(xc, yc, cx, mouth_y, 0.6 * p["mouth_w"], 0.8 * j["mouth_open"]))

    np.clip(img * (1.0 + j["brightness"]), 0.0, 1.0, out=img)
    return img


def render_synthetic_face(identity, variation, size=CANONICAL_SIZE):
    """Render one variation of an identity.

    Returns (image, landmarks): image is (size, size, 3) float64 in
    [-1, 1]; landmarks are the 68 points in output pixel coordinates.
    Deterministic in (identity, variation, size).
    """
    j = _variation_jitter(identity, variation)
    m = _jitter_matrix(j)
    k = CANONICAL_SIZE / float(size)

    # inverse of (scale-to-output o jitter): output px -> canonical coords
    a = m[:, :2]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    inv = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det
    ys, xs = np.mgrid[0:size, 0:size]
    ox = xs * k - m[0, 2]
    oy = ys * k - m[1, 2]
    xc = inv[0, 0] * ox + inv[0, 1] * oy
    yc = inv[1, 0] * ox + inv[1, 1] * oy

    img = _render_canonical(identity.params, j, xc, yc)
    pts = _landmarks_canonical(identity.params, j)
    pts = (pts @ m[:, :2].T + m[:, 2]) / k
    return img * 2.0 - 1.0, pts
