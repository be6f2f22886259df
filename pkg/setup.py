import numpy as np
from setuptools import setup
from Cython.Build import cythonize

setup(
    include_dirs=[np.get_include()],
    ext_modules=cythonize(
        "src/noisylink/_kernels/_scatter_cy.pyx",
        compiler_directives={"language_level": "3"},
    ),
)
