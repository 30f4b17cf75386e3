"""Build script for the optional compiled kernels.

The package is fully functional as pure Python; the Cython extension only
accelerates the hot scan loops (sensitive-word automaton, BM25 accumulation).
Build it in place with:

    python setup.py build_ext --inplace

If Cython or a C compiler is unavailable the extension is skipped and the
pure-Python kernels are selected at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "dbcopilot._kernels._native",
                ["src/dbcopilot/_kernels/_native.pyx"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
