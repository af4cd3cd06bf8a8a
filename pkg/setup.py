"""Builds the optional compiled kernels; the package falls back to pure Python without them."""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("AFDM_NO_EXTENSIONS"):
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("afdm._kernels", ["src/afdm/_kernels.pyx"],
                       include_dirs=[numpy.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                       extra_compile_args=["-O3", "-fno-fast-math", "-ffp-contract=off"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
