"""Build the optional compiled sequence kernels.

The package works without them (a numpy fallback is selected at import
time), so a failed compile downgrades to a warning instead of aborting
the install.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"skipping compiled kernels: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping compiled kernel {ext.name}: {exc}")


def get_extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        warnings.warn(f"compiled kernels disabled: {exc}")
        return []
    return cythonize(
        [
            Extension(
                "memqa.kernels._seqkern",
                ["src/memqa/kernels/_seqkern.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )


setup(
    ext_modules=get_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
