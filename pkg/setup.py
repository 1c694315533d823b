"""Builds the optional compiled RK4 kernel; the package works without it."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("GEOBRIDGE_NO_EXT", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("geobridge._kernel", ["src/geobridge/_kernel.pyx"],
                       include_dirs=[np.get_include()],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
