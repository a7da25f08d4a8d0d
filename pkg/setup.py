"""Build script for the optional compiled kernels.

The extension is optional: if Cython or a C compiler is unavailable the
package installs without it and the pure-NumPy fallback is used.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("SPINCAVITY_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:  # pragma: no cover
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "spincavity._core",
                    sources=["src/spincavity/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
