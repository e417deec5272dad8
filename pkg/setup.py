"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a NumPy fallback with identical
output is selected at import time), so a failed extension build downgrades
to a warning instead of aborting the install.
"""

import sys
import warnings

from setuptools import setup
from setuptools.errors import CCompilerError, ExecError, PlatformError


def _extensions():
    from Cython.Build import cythonize

    return cythonize(
        ["src/ghzforge/_kernels.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


try:
    setup(ext_modules=_extensions())
except (CCompilerError, ExecError, PlatformError, ImportError) as exc:
    warnings.warn(
        f"building the ghzforge._kernels extension failed ({exc!r}); "
        "installing with the pure-NumPy kernel only"
    )
    setup()
