import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernels fall back at import time
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("SHILLKIT_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "shillkit._kernels",
                ["src/shillkit/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # no -ffast-math / -march=native: keep IEEE semantics so the
                # compiled and fallback kernels agree to rounding
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
