"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy

    ext = Extension(
        "besovflow._kernels._speedups",
        ["src/besovflow/_kernels/_speedups.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize(ext, compiler_directives={"language_level": "3"})
except Exception as exc:  # pragma: no cover - build-env dependent
    import sys

    print(f"besovflow: skipping compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
