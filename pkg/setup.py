import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("XBARSIM_SKIP_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "xbarsim._accel._fast",
                    ["src/xbarsim/_accel/_fast.pyx"],
                    optional=True,
                )
            ],
            language_level="3",
        )
    except ImportError:
        # No Cython available: install runs with the pure-Python kernels.
        ext_modules = []

setup(ext_modules=ext_modules)
