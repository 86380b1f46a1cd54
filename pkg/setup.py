"""Build the optional Cython kernels.

If Cython or a C compiler is missing the package still installs and the
numpy fallback in ``ldpc_lab._pykernels`` is used at import time.
"""
import sys

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: C kernels not built ({exc}); using numpy fallback", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc})", file=sys.stderr)


def _extensions():
    from Cython.Build import cythonize

    return cythonize(
        [
            Extension(
                "ldpc_lab._ckernels",
                ["src/ldpc_lab/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )


try:
    ext_modules = _extensions()
except Exception as exc:  # noqa: BLE001
    print(f"warning: Cython kernels unavailable ({exc})", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
