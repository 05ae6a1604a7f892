import os

from setuptools import setup

ext_modules = []
if os.environ.get("REWRITEKIT_PURE") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/rewritekit/_levkernel.pyx"],
            language_level="3",
        )
    except ImportError:
        # The pure-Python kernel in _levkernel_py is selected at import time.
        ext_modules = []

setup(ext_modules=ext_modules)
