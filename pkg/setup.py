"""Build script: compiles the optional tree-kernel extension when Cython and a
C toolchain are available. Without them the package installs anyway and falls
back to the pure-numpy kernels at import time."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("SENTISCOPE_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "sentiscope.models._ckernels",
                    sources=["src/sentiscope/models/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
