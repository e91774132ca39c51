"""Build script for the optional compiled series kernels.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes the zonal-series hot loops
substantially faster.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "qrshape.zonal._backend_cy",
                ["src/qrshape/zonal/_backend_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
