"""Hot-kernel backend selection.

The compiled extension (demorph.kernels._native) is preferred when it
imports; otherwise the pure NumPy reference is used. Set
DEMORPH_KERNELS=python or DEMORPH_KERNELS=native to pin a backend
(pinning keeps runs bit-reproducible across machines with and without
the extension).
"""

import os

from . import reference


def _load():
    choice = os.environ.get("DEMORPH_KERNELS", "auto")
    if choice not in ("auto", "native", "python"):
        raise ValueError(f"DEMORPH_KERNELS must be auto|native|python, got {choice!r}")
    if choice == "python":
        return reference
    try:
        from . import _native
    except ImportError:
        if choice == "native":
            raise ImportError(
                "DEMORPH_KERNELS=native but the compiled extension is not built; "
                "run `pip install -e .` or `python setup.py build_ext --inplace`"
            )
        return reference
    return _native


_impl = _load()

BACKEND = _impl.BACKEND
im2col = _impl.im2col
col2im = _impl.col2im
warp_triangles = _impl.warp_triangles
warp_affine = _impl.warp_affine

__all__ = ["BACKEND", "im2col", "col2im", "warp_triangles", "warp_affine"]
