from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; kernels.py falls back at import
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "framebank._simkernel",
                ["src/framebank/_simkernel.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
