# Builds the optional compiled kernels. The package works without them
# (a pure-NumPy backend is selected at import), so a failed extension
# build degrades to the fallback instead of breaking the install.
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("TILERANK_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "tilerank._kernels._native",
                    sources=["src/tilerank/_kernels/_native.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
