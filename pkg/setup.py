"""Build script for the optional compiled kernels.

The package works without the extension; ``maxload.kernels`` falls back to
the numpy implementation when ``maxload._ckernels`` cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MAXLOAD_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "maxload._ckernels",
                    ["src/maxload/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3", "embedsignature": True},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
