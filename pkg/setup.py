"""Builds the optional compiled inner-loop extension.

The package works without it (a pure-NumPy backend is selected at import
time), so the extension is marked optional: a failed compile degrades the
install instead of breaking it.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "vitsim._loops_cy",
                ["src/vitsim/_loops_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
