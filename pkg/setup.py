from setuptools import Extension, setup
from Cython.Build import cythonize

# Compiled n-gram counting kernels for the evaluation metrics. The package
# falls back to the pure-Python implementation if the extension is absent,
# so a failed build only costs speed.
extensions = [
    Extension(
        "latdial._ngram_fast",
        ["src/latdial/_ngram_fast.pyx"],
        language="c++",
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
