"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (pure numpy fallbacks are selected
at import time), so any failure here degrades to a warning.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/feqtee/kernels/_speedups.pyx",
        compiler_directives={"language_level": "3"},
    )
    include_dirs = [numpy.get_include()]
    for ext in ext_modules:
        ext.include_dirs = include_dirs
        ext.extra_compile_args = ["-O3"]
except Exception as exc:  # pragma: no cover
    print(f"warning: building without compiled kernels ({exc})", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
