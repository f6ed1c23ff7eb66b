import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off keeps the compiled kernels IEEE-identical to the pure
# Python mirrors (no fused multiply-add in the hot loops).
extensions = [
    Extension(
        "ergodrift.kernels._ext",
        ["src/ergodrift/kernels/_ext.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O2", "-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
