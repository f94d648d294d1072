from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "fedlink._kernels._core",
                ["src/fedlink/_kernels/_core.pyx"],
                # -ffp-contract=off: no FMA fusion, keeps results bit-identical
                # with the numpy fallback.
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython available: install pure-Python only, kernels fall back at import.
    ext_modules = []

setup(ext_modules=ext_modules)
