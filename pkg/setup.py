"""Build the optional compiled kernels.

The package works without them: ``ctcsim.kernels`` falls back to the
pure-Python implementation when ``ctcsim._kernels`` cannot be imported.
Set ``CTCSIM_NO_EXT=1`` to skip the extension build entirely.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("CTCSIM_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "ctcsim._kernels",
                    ["src/ctcsim/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
