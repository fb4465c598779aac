"""Build script: compiles the optional fast kernel extension.

The package installs fine without a C compiler; the pure-NumPy backend is
selected at import time when the extension is missing.
"""

import numpy as np
from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"WARNING: fast kernel build skipped ({exc}); "
                  "pure-Python backend will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: building {ext.name} failed ({exc}); "
                  "pure-Python backend will be used")


def extensions():
    import os
    if not os.path.exists("src/eventcast/neural/_core.pyx"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension
    ext = Extension(
        "eventcast.neural._core",
        ["src/eventcast/neural/_core.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize(
        [ext],
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )


setup(
    ext_modules=extensions(),
    include_dirs=[np.get_include()],
    cmdclass={"build_ext": OptionalBuildExt},
)
