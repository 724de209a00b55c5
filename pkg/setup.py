"""Build the optional compiled path kernels.

If Cython or a C compiler is missing the package installs without the
extension and falls back to ``solar_planner._kernels_py`` at import time.
"""

import os
import sys

from setuptools import setup


def extensions():
    if os.environ.get("SOLAR_PLANNER_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    openmp = [] if sys.platform == "darwin" else ["-fopenmp"]
    ext = Extension(
        "solar_planner._kernels",
        ["src/solar_planner/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", *openmp],
        extra_link_args=openmp,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3, quiet=True)


setup(ext_modules=extensions())
