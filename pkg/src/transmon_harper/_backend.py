"""Backend switch for the compiled kernels.

Set ``TRANSMON_HARPER_BACKEND=numpy`` to force the pure-numpy path. The
default is ``numba`` when it imports, otherwise numpy.
"""

import os

ENV_FLAG = "TRANSMON_HARPER_BACKEND"

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None


def _requested():
    return os.environ.get(ENV_FLAG, "numba").strip().lower()


USE_NUMBA = _numba is not None and _requested() not in ("numpy", "python", "off", "0")
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(fn):
    """Compile with numba when available, else return the plain function."""
    if _numba is None:
        return fn
    return _numba.njit(cache=True)(fn)
