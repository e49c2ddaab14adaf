"""Build hook for the optional compiled integrator kernel.

The package is fully functional without the extension (a pure-Python twin
is selected at import time), so build failures are non-fatal.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext = Extension(
        "tmdc._kernels",
        sources=["src/tmdc/_kernels.pyx"],
        # No -ffast-math and contraction off: the compiled kernel must be
        # bit-identical to the pure-Python twin.
        extra_compile_args=["-O2", "-ffp-contract=off"],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)
except ImportError:
    pass

# Name/layout duplicated from pyproject.toml so legacy setup.py code paths
# (old setuptools without PEP 621/660 support) still resolve the src layout.
setup(
    name="tmdc",
    package_dir={"": "src"},
    packages=["tmdc"],
    package_data={"tmdc": ["scenarios/*.scn"]},
    ext_modules=ext_modules,
)
