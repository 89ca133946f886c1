import numpy as np
from setuptools import Extension, setup

# The compiled QP kernel is optional: the package falls back to the pure
# scipy backend when the extension is absent (see shrinkmpc/qp/__init__.py).
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "shrinkmpc.qp._core",
                ["src/shrinkmpc/qp/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
