import os

from setuptools import setup

ext_modules = []
if not os.environ.get("VISEQ_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "viseq._kernels",
                    ["src/viseq/_kernels.pyx"],
                    # keeps results bit-identical to the pure-Python fallback
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
