"""Backend selection for the hot numeric kernels.

Every kernel in this subpackage is written once, in nopython-compatible
NumPy, and exists in two callable forms: the plain Python function
(``*_py``) and a numba-compiled version (``*_nb``). The module-level name
without a suffix is bound to one of the two at import time:

* ``GHFORECAST_NUMBA=0`` in the environment forces the pure-NumPy path;
* otherwise numba is used whenever it can be imported.

``benchmarks/bench_kernels.py`` times both forms side by side.
"""

import os

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay runnable
    _njit = None
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and os.environ.get("GHFORECAST_NUMBA", "1") != "0"


def jit(fn):
    """Return a numba-compiled version of fn, or None when numba is absent."""
    if not HAVE_NUMBA:
        return None
    return _njit(cache=True)(fn)


def select(py_impl, nb_impl):
    """Pick the implementation the package binds by default."""
    if NUMBA_ENABLED and nb_impl is not None:
        return nb_impl
    return py_impl


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"
