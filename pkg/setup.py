import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext = Extension(
    "torusdyn._kernels._core",
    sources=["src/torusdyn/_kernels/_core.pyx"],
    include_dirs=[numpy.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O3"],
    optional=True,  # build failure degrades to the pure backend, never breaks install
)

setup(ext_modules=cythonize([ext], language_level=3) if cythonize else [])
