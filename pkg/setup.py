"""Build script for the compiled path-simulation kernel.

The package works without the extension (a numpy fallback is selected at
import); building it just makes the Monte Carlo hot loop faster.
"""
import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "switchctl._pathsim",
        sources=["src/switchctl/_pathsim.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
