"""Build script for the optional compiled kernel core.

The package works without the extension (a pure-numpy fallback is selected
at import time); building it just makes training faster.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "codelen._fast",
                ["src/codelen/_fast.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
