"""Build script for the optional compiled stepping kernel.

The package works without the extension (a pure-Python kernel is selected at
import time), so a failed compile only costs speed. Keep -ffast-math OUT of
the flags: the kernel must produce bit-identical results to the fallback.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "mapdr._stepcore",
                ["src/mapdr/_stepcore.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
