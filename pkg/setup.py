from setuptools import setup, Extension

import numpy as np
from Cython.Build import cythonize

extensions = [
    Extension(
        "diffsim._corecy",
        ["src/diffsim/_corecy.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-fwrapv"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
