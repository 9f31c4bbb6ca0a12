import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "genlab._ckernels",
        ["src/genlab/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O2"],
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
