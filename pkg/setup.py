"""Build script for the optional compiled likelihood kernels.

The package is pure Python plus one Cython extension holding the hot
contrastive-likelihood loops.  If Cython or a C compiler is missing the
extension is skipped and the numpy fallback in designrl.kernels.pyref is
used at import time instead.
"""

from setuptools import Extension, setup


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "designrl.kernels._native",
        sources=["src/designrl/kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
