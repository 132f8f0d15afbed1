import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernels are optional: the package falls back to the pure
# NumPy implementations in demorph.kernels.reference when the extension
# is missing. No -ffast-math: kernel results must match IEEE semantics
# of the reference implementation.
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "demorph.kernels._native",
                ["src/demorph/kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
