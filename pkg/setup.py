import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# -ffp-contract=off keeps the compiled kernel bit-identical to the numpy
# fallback (no fused multiply-add in the pivot update).
extensions = [
    Extension(
        "caccsim._simplex_core",
        ["src/caccsim/_simplex_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

if cythonize is not None:
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})
else:
    # No Cython: install without the compiled kernel; the package falls back
    # to the pure-numpy simplex at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
