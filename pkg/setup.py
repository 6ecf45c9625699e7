"""Build script: compiles the optional fast kernels when Cython is available.

A plain `pip install .` without Cython or a C compiler still produces a
working package; lpskit._core falls back to the pure-Python kernels at
import time.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "lpskit._core._kernels",
                ["src/lpskit/_core/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                # keep FP results bitwise-identical to the numpy fallback
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError as err:
    print(f"lpskit: building without compiled kernels ({err})", file=sys.stderr)

setup(ext_modules=ext_modules)
