"""Build script.

The only compiled piece is the truncated-polynomial product kernel in
``detourcheck.jetcalc._jetcore``.  It is optional: if Cython (or a C
compiler) is unavailable the package falls back to a numpy implementation
selected at import time, so a failed extension build is not fatal.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/detourcheck/jetcalc/_jetcore.pyx"],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
