"""Build the optional compiled kernels; the package works without them."""
import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("RIS_STOGEO_NO_EXT"):
        return []
    try:
        import numpy  # noqa: F401
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "ris_stogeo._kernels",
        ["src/ris_stogeo/_kernels.pyx"],
        extra_compile_args=["-O3", "-fno-fast-math"],
        optional=True,
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
