import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off (no fused multiply-add) and -fno-builtin-sincos (no
# sin/cos pair fusion) keep the compiled kernels bit-identical to the pure
# Python fallback, which calls libm sin and cos separately.
ext = Extension(
    "ranktwo._kernels",
    ["src/ranktwo/_kernels.pyx"],
    include_dirs=[np.get_include()],
    library_dirs=[os.path.join(os.path.dirname(np.__file__), "random", "lib")],
    libraries=["npyrandom"],
    extra_compile_args=["-O2", "-ffp-contract=off", "-fno-builtin-sin", "-fno-builtin-cos", "-fno-builtin-sincos"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level=3))
