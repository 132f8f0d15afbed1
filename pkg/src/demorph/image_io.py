"""Image array conventions and PNG round-tripping.

Images are h x w x 3 float64 arrays with values in [-1, 1]. On disk they
are 8-bit RGB PNG; the conversions are v/127.5 - 1 on load and
round((v + 1) * 127.5) clamped to [0, 255] on save.
"""

import numpy as np
from PIL import Image

from .errors import ShapeError


def validate_image(img, name="image"):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"{name} must be h x w x 3, got shape {img.shape}")
    if not np.isfinite(img).all():
        raise ShapeError(f"{name} contains non-finite values")
    return np.ascontiguousarray(img, dtype=np.float64)


def from_uint8(arr):
    """uint8 RGB -> float64 in [-1, 1]."""
    return np.asarray(arr, dtype=np.float64) / 127.5 - 1.0


def to_uint8(img):
    """float64 in [-1, 1] -> uint8 RGB (values clamped)."""
    out = np.round((np.asarray(img, dtype=np.float64) + 1.0) * 127.5)
    return np.clip(out, 0.0, 255.0).astype(np.uint8)


def load_image(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"))
    return from_uint8(arr)


def save_image(path, img):
    img = validate_image(img)
    Image.fromarray(to_uint8(img), mode="RGB").save(path, format="PNG")
