"""Build hook for the optional Cython kernels.

The package works without them: ``choquet.kernels`` falls back to numpy
when the compiled module cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("CHOQUET_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "choquet._kernels",
                    ["src/choquet/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
