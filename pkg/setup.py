"""Build script for the compiled kernel extension.

The extension is optional at runtime: sada._kernels falls back to the pure
numpy implementation when the compiled module is absent (or when
SADA_PURE_PYTHON=1 is set). Set SADA_SKIP_EXT=1 to install without a C
toolchain.

-ffp-contract=off keeps the C arithmetic un-fused so the compiled kernels are
bit-identical to the numpy fallback.
"""

import os

from setuptools import Extension, setup

if os.environ.get("SADA_SKIP_EXT") == "1":
    ext_modules = []
else:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "sada._kernels._fast",
                sources=["src/sada/_kernels/_fast.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
