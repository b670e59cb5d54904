"""Build hook for the optional compiled sweep kernels.

Without Cython, or if compilation fails, the package installs with the NumPy
kernels only.  Set PLAPMVF_NO_OPENMP=1 to build without OpenMP.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"warning: compiled kernels not built ({exc}); using the NumPy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"warning: {ext.name} not built ({exc}); using the NumPy fallback")


def extensions():
    try:
        from Cython.Build import cythonize
        import numpy  # noqa: F401
    except ImportError:
        return []
    from setuptools import Extension

    omp = [] if os.environ.get("PLAPMVF_NO_OPENMP") else ["-fopenmp"]
    ext = Extension(
        "plapmvf.dpp._kernels",
        ["src/plapmvf/dpp/_kernels.pyx"],
        extra_compile_args=["-O3"] + omp,
        extra_link_args=omp,
    )
    return cythonize([ext], language_level=3, quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
