"""Build hook for the optional compiled curve kernel.

The package is pure Python except for votebooth._secp_native, a Cython
module with fixed-limb secp256k1 field and point arithmetic. If Cython or
a C compiler is missing the build silently skips the extension and the
pure-Python kernel in votebooth._secp_pure is used instead.
"""

from setuptools import setup, Extension

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "votebooth._secp_native",
                ["src/votebooth/_secp_native.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print("skipping native extension build: %s" % exc)

setup(ext_modules=ext_modules)
