"""Build script: compiles the optional Cython kernels.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed cythonization or compilation is non-fatal.
"""

import sys

from setuptools import Extension, setup


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"propburn: skipping compiled kernels ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "propburn.kernels.blocktri",
        ["src/propburn/kernels/blocktri.pyx"],
        include_dirs=[numpy.get_include()],
    )
    try:
        return cythonize([ext], language_level=3)
    except Exception as exc:
        print(f"propburn: skipping compiled kernels ({exc})", file=sys.stderr)
        return []


setup(ext_modules=extensions())
