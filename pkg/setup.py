"""Build script: compiles the optional min-cost-flow kernel extension.

The package is fully functional without the extension (setoff.kernel falls
back to the pure-Python twin), so any failure to cythonize or compile must
not break installation.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "setoff._mincostx",
                sources=["src/setoff/_mincostx.pyx"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"setoff: skipping compiled kernel ({exc}); pure-Python fallback will be used")

setup(ext_modules=ext_modules)
