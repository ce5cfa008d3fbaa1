"""Build script: compiles the optional LDL^T kernel extension.

Set STOSQP_NO_EXT=1 to skip the extension and install the pure-NumPy
backend only (stosqp.backend falls back automatically at import time).
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("STOSQP_NO_EXT"):
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "stosqp._kernels",
                ["src/stosqp/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
