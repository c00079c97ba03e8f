"""Build the optional Cython kernels; the package falls back to NumPy without them."""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SUBMX_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "submx.kernels._ckernels",
                    ["src/submx/kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
