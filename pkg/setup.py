import os
import sys

from Cython.Build import cythonize
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

openmp = [] if os.environ.get("LAGFLOW_NO_OPENMP") else ["-fopenmp"]

extensions = [
    Extension(
        "lagflow._core",
        ["src/lagflow/_core.pyx"],
        extra_compile_args=["-O3", "-fno-fast-math", "-ffp-contract=off"] + openmp,
        extra_link_args=openmp,
    )
]


class OptionalBuildExt(build_ext):
    """Fall back to the pure-Python kernels when the extension cannot be compiled."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler, no OpenMP, ...
            if os.environ.get("LAGFLOW_REQUIRE_EXTENSION"):
                raise
            print(f"warning: building lagflow._core failed ({exc}); using the numpy kernels",
                  file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            if os.environ.get("LAGFLOW_REQUIRE_EXTENSION"):
                raise
            print(f"warning: building {ext.name} failed ({exc}); using the numpy kernels",
                  file=sys.stderr)


setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
    cmdclass={"build_ext": OptionalBuildExt},
)
