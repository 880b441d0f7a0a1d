"""Build script: compiles the Cython hot kernel when Cython is available.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so a missing compiler or Cython only costs speed.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "kmsw.ot._katyusha",
                ["src/kmsw/ot/_katyusha.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
