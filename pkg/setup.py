"""Build script for the optional compiled kernels.

The package works without the extension (a pure-Python twin of every compiled
routine ships in mcverify.gaussian._fallback), so a failed compile must not
fail the install.  We attempt to cythonize; any error downgrades to a
source-only build with a warning.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: building mcverify.gaussian._core failed ({exc}); "
                  "falling back to the pure-Python kernels", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: {ext.name} failed to compile ({exc}); "
                  "falling back to the pure-Python kernels", file=sys.stderr)


def extensions():
    import os

    if not os.path.exists("src/mcverify/gaussian/_core.pyx"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension(
        "mcverify.gaussian._core",
        sources=["src/mcverify/gaussian/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # contraction off: the compiled kernels must round a + b*c exactly
        # like CPython so the pure-Python twin stays bit-identical
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
