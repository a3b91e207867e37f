"""Build script: compiles the optional segment-memory extension.

The extension is a pure accelerator.  If Cython or a C compiler is
missing the install falls back to the pure-Python kernel selected at
import time in mswasm.segmem.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("mswasm._segcore", ["src/mswasm/_segcore.pyx"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
