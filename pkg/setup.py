"""Build script for the compiled simulation core.

The extension is optional at runtime: if it fails to build or import, the
package falls back to the pure-Python kernels in ``safeform._pycore``.
``-ffp-contract=off`` keeps the C arithmetic bit-identical to the Python
backend (no fused multiply-adds).
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "safeform._core",
        ["src/safeform/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
