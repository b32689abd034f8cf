import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# Compiled kernel core; the package falls back to swcyl._ref if this
# extension is missing (see swcyl._backend).
extensions = [
    Extension(
        "swcyl._core",
        ["src/swcyl/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3", "-fno-math-errno"],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
