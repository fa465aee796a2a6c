"""Build script: compiles the optional Cython likelihood kernel.

If Cython or a C compiler is unavailable the package still installs; the
pure-numpy kernel is selected at import time instead.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("DCTM_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/dctm/kernels/_core.pyx"],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
        for ext in ext_modules:
            ext.include_dirs.append(numpy.get_include())
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
